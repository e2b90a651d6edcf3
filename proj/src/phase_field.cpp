#include "neurogrow/phase_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <random>
#include <string>

#include "neurogrow/kernels.hpp"

namespace neurogrow {

void ModelParams::validate() const {
    const double rates[] = {mobility,          axon_mobility,     orientation_coeff, latent_heat,
                            alpha_over_pi,     gamma,             tubulin_diffusion, tubulin_transport,
                            tubulin_decay,     tubulin_production, assembly_rate,     disassembly_rate,
                            cone_assembly_rate, cone_disassembly_rate, anisotropy_strength};
    for (double r : rates) {
        if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("model rates must be finite and nonnegative");
    }
    if (!(dt > 0.0) || !(time_scale > 0.0)) throw ConfigError("dt and time_scale must be positive");
    if (!(seed_radius > 0.0)) throw ConfigError("seed radius must be positive");
    if (!(seed_interface_width >= 0.0)) throw ConfigError("seed interface width must be nonnegative");
}

ControlFields ControlFields::defaults(std::size_t n, const ModelParams& params) {
    ControlFields c;
    c.mobility.assign(n, params.mobility);
    c.assembly_rate.assign(n, params.assembly_rate);
    c.disassembly_rate.assign(n, params.disassembly_rate);
    c.energy_mask.assign(n, 0);
    return c;
}

void SimState::refresh_static(const CollocationOperators& ops) {
    theta_dx = ops.apply(ops.Nx(), theta.coeffs);
    theta_dy = ops.apply(ops.Ny(), theta.coeffs);
    const auto gx = ops.apply(ops.Nx(), phi0.coeffs);
    const auto gy = ops.apply(ops.Ny(), phi0.coeffs);
    source_density.resize(gx.size());
    for (std::size_t k = 0; k < gx.size(); ++k) source_density[k] = gx[k] * gx[k] + gy[k] * gy[k];
}

RealGrid SimState::phi_grid() const {
    RealGrid g(nu, nv);
    g.data() = phi.values;
    return g;
}

FieldDerivatives FieldDerivatives::compute(const SimState& s, const CollocationOperators& ops) {
    FieldDerivatives d;
    d.phi = s.phi.values;
    d.phi_x = ops.apply(ops.Nx(), s.phi.coeffs);
    d.phi_y = ops.apply(ops.Ny(), s.phi.coeffs);
    d.phi_xx = ops.apply(ops.Nxx(), s.phi.coeffs);
    d.phi_yy = ops.apply(ops.Nyy(), s.phi.coeffs);
    d.phi_xy = ops.apply(ops.Nxy(), s.phi.coeffs);
    d.c = s.tubulin.values;
    d.c_x = ops.apply(ops.Nx(), s.tubulin.coeffs);
    d.c_y = ops.apply(ops.Ny(), s.tubulin.coeffs);
    d.c_xx = ops.apply(ops.Nxx(), s.tubulin.coeffs);
    d.c_yy = ops.apply(ops.Nyy(), s.tubulin.coeffs);
    const auto txx = ops.apply(ops.Nxx(), s.temperature.coeffs);
    const auto tyy = ops.apply(ops.Nyy(), s.temperature.coeffs);
    d.t_lap.resize(txx.size());
    for (std::size_t k = 0; k < txx.size(); ++k) d.t_lap[k] = txx[k] + tyy[k];
    return d;
}

SimState initialize_state(const std::vector<Point>& centers, const ModelParams& params,
                          const SplineSpace2D& space, const CollocationOperators& ops, std::uint64_t seed) {
    params.validate();
    if (centers.empty()) throw ConfigError("at least one neuron center is required");
    const double r0 = params.seed_radius;
    for (const auto& c : centers) {
        const double margin = std::min({c.x - space.ku.front(), space.ku.back() - c.x, c.y - space.kv.front(),
                                        space.kv.back() - c.y});
        if (!(margin > r0)) throw ConfigError("neuron center closer than the seed radius to the domain boundary");
    }

    SimState s;
    s.nu = space.nu();
    s.nv = space.nv();
    const std::size_t n = s.size();
    std::vector<double> phi(n), c(n), theta(n), temp(n, 0.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int j = 0; j < s.nv; ++j) {
        for (int i = 0; i < s.nu; ++i) {
            const Point p = space.point(i, j);
            double r = std::numeric_limits<double>::infinity();
            for (const auto& ctr : centers) r = std::min(r, distance(p, ctr));
            const std::size_t k = std::size_t(j) * s.nu + i;
            const double w = params.seed_interface_width;
            phi[k] = w > 0.0 ? 0.5 * (1.0 + std::tanh((r0 - r) / w)) : (r <= r0 ? 1.0 : 0.0);
            c[k] = 0.5 * (1.0 + std::tanh((r0 - r) / 2.0));
        }
    }
    for (auto& t : theta) t = unit(rng);

    s.phi = Field::from_values(ops, phi);
    s.phi0 = s.phi;
    s.tubulin = Field::from_values(ops, std::move(c));
    s.theta = Field::from_values(ops, std::move(theta));
    s.temperature = Field::from_values(ops, std::move(temp));
    s.refresh_static(ops);
    s.source_norm = integrate_gradient_squared(space, s.phi0.coeffs);
    if (!(s.source_norm > 0.0)) throw ConfigError("initial phase field has no interface");
    return s;
}

namespace {

struct AnisoPoint {
    double a, da, d2a;
};

inline AnisoPoint aniso_at(double psi, double theta, const ModelParams& p) {
    const double j = p.anisotropy_mode;
    const double arg = j * (psi - 2.0 * std::numbers::pi * theta);
    const double cs = std::cos(arg), sn = std::sin(arg);
    return {1.0 + p.anisotropy_strength * cs, -p.anisotropy_strength * j * sn,
            -p.anisotropy_strength * j * j * cs};
}

void require_finite(std::span<const double> v, long iteration, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericalInstability(iteration, std::string("non-finite value in ") + what);
    }
}

}  // namespace

AnisotropyValues anisotropy(std::span<const double> phi_x, std::span<const double> phi_y,
                            std::span<const double> theta, const ModelParams& params) {
    AnisotropyValues out;
    out.a.resize(phi_x.size());
    out.da.resize(phi_x.size());
    kernels::for_each(phi_x.size(), [&](std::size_t k) {
        // atan2(0, 0) == 0 gives the psi = 0 convention for flat regions.
        const auto v = aniso_at(std::atan2(phi_y[k], phi_x[k]), theta[k], params);
        out.a[k] = v.a;
        out.da[k] = v.da;
    });
    return out;
}

std::vector<double> tubulin_consumption(std::span<const double> c_tub, const ControlFields& controls) {
    std::vector<double> out(c_tub.size());
    for (std::size_t k = 0; k < c_tub.size(); ++k)
        out[k] = controls.assembly_rate[k] * c_tub[k] - controls.disassembly_rate[k];
    return out;
}

std::vector<double> energy_term(const SimState& s, const ControlFields& controls, const ModelParams& params) {
    const auto& c = s.tubulin.values;
    const auto& t = s.temperature.values;
    std::vector<double> e(s.size(), 0.0);
    kernels::for_each(e.size(), [&](std::size_t k) {
        if (!controls.energy_mask[k]) return;
        const double growth = controls.assembly_rate[k] * c[k] - controls.disassembly_rate[k];
        const double gate = growth > 0.0 ? 1.0 : 0.0;
        const double undercooling = params.equilibrium_temperature - t[k];
        e[k] = params.alpha_over_pi * std::atan(gate * params.gamma * undercooling);
    });
    return e;
}

std::vector<double> phase_rhs(const SimState& s, const ControlFields& controls, const CollocationOperators& ops,
                              const ModelParams& params) {
    return phase_rhs(s, FieldDerivatives::compute(s, ops), controls, params);
}

std::vector<double> phase_rhs(const SimState& s, const FieldDerivatives& d, const ControlFields& controls,
                              const ModelParams& params) {
    const auto energy = energy_term(s, controls, params);
    const auto& theta = s.theta.values;
    std::vector<double> out(s.size());
    kernels::for_each(out.size(), [&](std::size_t k) {
        const double px = d.phi_x[k], py = d.phi_y[k];
        const double pxx = d.phi_xx[k], pyy = d.phi_yy[k], pxy = d.phi_xy[k];
        const double grad2 = px * px + py * py;
        const auto an = aniso_at(std::atan2(py, px), theta[k], params);

        // a and a' depend on x through psi = atan2(phi_y, phi_x); theta is a
        // per-point grain orientation and is held locally constant here:
        //   d(psi)/dx = (phi_x phi_xy - phi_y phi_xx) / |grad phi|^2
        //   d(psi)/dy = (phi_x phi_yy - phi_y phi_xy) / |grad phi|^2
        //   da/dx = a' psi_x,  da'/dx = a'' psi_x
        double arg_x = 0.0, arg_y = 0.0;
        if (grad2 > 1e-12) {
            arg_x = (px * pxy - py * pxx) / grad2;
            arg_y = (px * pyy - py * pxy) / grad2;
        }
        const double a_x = an.da * arg_x, a_y = an.da * arg_y;
        const double da_x = an.d2a * arg_x, da_y = an.d2a * arg_y;

        // div(a^2 grad phi) = a^2 lap(phi) + 2a (a_x phi_x + a_y phi_y)
        const double diffusion = an.a * an.a * (pxx + pyy) + 2.0 * an.a * (a_x * px + a_y * py);
        // -d/dx(a a' phi_y) + d/dy(a a' phi_x); the a a' phi_xy parts cancel.
        const double cross = -(a_x * an.da * py + an.a * da_x * py) + (a_y * an.da * px + an.a * da_y * px);

        const double phi = d.phi[k];
        const double grad_theta = std::hypot(s.theta_dx[k], s.theta_dy[k]);
        const double reaction =
            phi * (1.0 - phi) * (phi - 0.5 + energy[k] + 6.0 * params.orientation_coeff * grad_theta);
        out[k] = controls.mobility[k] * (diffusion + cross + reaction);
    });
    require_finite(out, s.iteration, "phase rate");
    return out;
}

std::vector<double> tubulin_rhs(const SimState& s, const CollocationOperators& ops, const ModelParams& params) {
    return tubulin_rhs(s, FieldDerivatives::compute(s, ops), params);
}

std::vector<double> tubulin_rhs(const SimState& s, const FieldDerivatives& d, const ModelParams& params) {
    std::vector<double> out(s.size());
    const double production = params.tubulin_production / s.source_norm;
    kernels::for_each(out.size(), [&](std::size_t k) {
        const double phi = d.phi[k], c = d.c[k];
        const double px = d.phi_x[k], py = d.phi_y[k];
        // div(phi grad c) = phi lap(c) + grad(phi) . grad(c)
        const double diffusion = phi * (d.c_xx[k] + d.c_yy[k]) + px * d.c_x[k] + py * d.c_y[k];
        // Active transport along -grad(phi)/|grad(phi)|, soma toward tip.
        double transport = 0.0;
        const double gnorm = std::hypot(px, py);
        if (gnorm >= 1e-8) {
            const double ux = c * px + phi * d.c_x[k];  // grad(phi c)
            const double uy = c * py + phi * d.c_y[k];
            transport = -(px * ux + py * uy) / gnorm;
        }
        out[k] = params.tubulin_diffusion * diffusion - params.tubulin_transport * transport -
                 params.tubulin_decay * phi * c + production * s.source_density[k];
    });
    require_finite(out, s.iteration, "tubulin rate");
    return out;
}

std::vector<double> temperature_rhs(const SimState& s, const CollocationOperators& ops,
                                    std::span<const double> phase_rate, const ModelParams& params) {
    const auto txx = ops.apply(ops.Nxx(), s.temperature.coeffs);
    const auto tyy = ops.apply(ops.Nyy(), s.temperature.coeffs);
    std::vector<double> out(s.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = txx[k] + tyy[k] + params.latent_heat * phase_rate[k];
    require_finite(out, s.iteration, "temperature rate");
    return out;
}

SimState step(const SimState& s, const ControlFields& controls, const CollocationOperators& ops,
              const ModelParams& params, double dt_override) {
    const double dt = dt_override > 0.0 ? dt_override : params.effective_dt();
    const auto d = FieldDerivatives::compute(s, ops);
    const auto r_phi = phase_rhs(s, d, controls, params);
    const auto r_u = tubulin_rhs(s, d, params);

    const std::size_t n = s.size();
    const int nu = s.nu, nv = s.nv;
    std::vector<double> phi(n), c(n), temp(n);
    kernels::for_each(n, [&](std::size_t k) {
        // Boundary collocation points hold their values (Dirichlet rows).
        const int i = int(k % nu), j = int(k / nu);
        const double hold = (i == 0 || j == 0 || i == nu - 1 || j == nv - 1) ? 0.0 : 1.0;
        phi[k] = d.phi[k] + hold * dt * r_phi[k];
        const double u = d.phi[k] * d.c[k] + hold * dt * r_u[k];
        c[k] = phi[k] > 1e-3 ? u / phi[k] : 0.0;
        temp[k] = s.temperature.values[k] + hold * dt * (d.t_lap[k] + params.latent_heat * r_phi[k]);
    });
    require_finite(phi, s.iteration, "phase field");
    require_finite(c, s.iteration, "tubulin");
    require_finite(temp, s.iteration, "temperature");
    const auto [lo, hi] = std::minmax_element(phi.begin(), phi.end());
    if (*lo < kPhiLower || *hi > kPhiUpper) {
        throw NumericalInstability(s.iteration, "phase field left [" + std::to_string(kPhiLower) + ", " +
                                                    std::to_string(kPhiUpper) + "]: range [" + std::to_string(*lo) +
                                                    ", " + std::to_string(*hi) + "]");
    }

    SimState next = s;
    next.phi = Field::from_values(ops, std::move(phi));
    next.tubulin = Field::from_values(ops, std::move(c));
    next.temperature = Field::from_values(ops, std::move(temp));
    next.iteration = s.iteration + 1;
    next.time = s.time + dt;
    return next;
}

}  // namespace neurogrow
