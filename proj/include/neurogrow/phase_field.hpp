#pragma once

// Coupled phase-field / tubulin / undercooling model on the collocation grid.
//
//   dphi/dt        = M [ div(a^2 grad phi) - d/dx(a a' phi_y) + d/dy(a a' phi_x)
//                        + phi(1-phi)(phi - 1/2 + E + 6H|grad theta|) ]
//   d(phi c)/dt    = delta_t div(phi grad c) - alpha_t . grad(phi c) - beta_t phi c
//                    + eps0 |grad phi0|^2 / int |grad phi0|^2
//   dT/dt          = lap T + K dphi/dt
//   E              = (alpha/pi) atan(H_step(dL/dt) gamma (T_eq - T))
//   dL/dt          = r_g c - s_g
//
// with a(psi) = 1 + delta_a cos(j_a (psi - 2 pi theta)) and psi = atan2(phi_y, phi_x).

#include <cstdint>
#include <span>
#include <vector>

#include "neurogrow/grid.hpp"
#include "neurogrow/spline.hpp"

namespace neurogrow {

struct ModelParams {
    double mobility = 60.0;            // M_phi outside axon growth cones
    double axon_mobility = 100.0;      // M_phi on the axon growth cone
    double orientation_coeff = 0.007;  // H
    double latent_heat = 2.0;          // K
    double alpha_over_pi = 0.2865;
    double gamma = 10.0;
    double tubulin_diffusion = 4.0;    // delta_t
    double tubulin_transport = 0.001;  // alpha_t
    double tubulin_decay = 0.001;      // beta_t
    double tubulin_production = 15.0;  // epsilon_0
    double assembly_rate = 5.0;        // r_g
    double disassembly_rate = 0.1;     // s_g
    double cone_assembly_rate = 50.0;
    double cone_disassembly_rate = 0.0;
    double anisotropy_strength = 0.02;  // delta_a; stiffness stays positive while delta_a < 1/(j_a^2 - 1)
    int anisotropy_mode = 6;            // j_a
    double equilibrium_temperature = 1.0;
    double dt = 0.05;
    double seed_radius = 20.0;  // r0, grid units
    // Seed edge profile phi = (1 + tanh((r0 - r) / w)) / 2; w = 0 gives a sharp disk.
    double seed_interface_width = 2.0;
    // Model time advanced per unit of dt; the effective Euler step is dt * time_scale.
    double time_scale = 0.01;

    double effective_dt() const noexcept { return dt * time_scale; }
    void validate() const;
};

struct ControlFields {
    std::vector<double> mobility;
    std::vector<double> assembly_rate;
    std::vector<double> disassembly_rate;
    std::vector<std::uint8_t> energy_mask;

    static ControlFields defaults(std::size_t n, const ModelParams& params);
};

struct SimState {
    int nu = 0;
    int nv = 0;
    Field phi;
    Field theta;
    Field temperature;
    Field tubulin;
    Field phi0;
    double source_norm = 0.0;
    long iteration = 0;
    double time = 0.0;

    // Static derived data, refreshed by refresh_static().
    std::vector<double> theta_dx, theta_dy;
    std::vector<double> source_density;  // |grad phi0|^2 at Greville points

    std::size_t size() const noexcept { return std::size_t(nu) * nv; }
    void refresh_static(const CollocationOperators& ops);
    RealGrid phi_grid() const;
};

/// Derivative values of the evolving fields at the Greville points.
struct FieldDerivatives {
    std::vector<double> phi, phi_x, phi_y, phi_xx, phi_yy, phi_xy;
    std::vector<double> c, c_x, c_y, c_xx, c_yy;
    std::vector<double> t_lap;

    static FieldDerivatives compute(const SimState& s, const CollocationOperators& ops);
};

SimState initialize_state(const std::vector<Point>& centers, const ModelParams& params,
                          const SplineSpace2D& space, const CollocationOperators& ops, std::uint64_t seed);

struct AnisotropyValues {
    std::vector<double> a;
    std::vector<double> da;  // da/dpsi
};

/// a(psi) and da/dpsi at every point; theta is the orientation field in [0, 1].
AnisotropyValues anisotropy(std::span<const double> phi_x, std::span<const double> phi_y,
                            std::span<const double> theta, const ModelParams& params);

/// dL/dt = r_g c - s_g pointwise.
std::vector<double> tubulin_consumption(std::span<const double> c_tub, const ControlFields& controls);

std::vector<double> energy_term(const SimState& s, const ControlFields& controls, const ModelParams& params);

std::vector<double> phase_rhs(const SimState& s, const ControlFields& controls, const CollocationOperators& ops,
                              const ModelParams& params);
std::vector<double> phase_rhs(const SimState& s, const FieldDerivatives& d, const ControlFields& controls,
                              const ModelParams& params);

std::vector<double> tubulin_rhs(const SimState& s, const CollocationOperators& ops, const ModelParams& params);
std::vector<double> tubulin_rhs(const SimState& s, const FieldDerivatives& d, const ModelParams& params);

std::vector<double> temperature_rhs(const SimState& s, const CollocationOperators& ops,
                                    std::span<const double> phase_rate, const ModelParams& params);

/// phi must stay inside this band after an accepted step.
inline constexpr double kPhiLower = -0.05;
inline constexpr double kPhiUpper = 1.05;

/// One explicit Euler step of length dt_override (or params.effective_dt()).
/// Throws NumericalInstability on non-finite values or phi leaving its band.
SimState step(const SimState& s, const ControlFields& controls, const CollocationOperators& ops,
              const ModelParams& params, double dt_override = 0.0);

}  // namespace neurogrow
