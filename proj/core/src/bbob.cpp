#include "lforge/bbob.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "lforge/rng.hpp"

namespace lforge::bbob {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kPi = std::numbers::pi;

// Exponent ratio (i)/(d-1) for zero-based axis i; 0 in one dimension.
double axis_ratio(std::size_t i, std::size_t d)
{
    return d > 1 ? static_cast<double>(i) / static_cast<double>(d - 1) : 0.0;
}

double lambda_entry(double alpha, std::size_t i, std::size_t d)
{
    return std::pow(alpha, 0.5 * axis_ratio(i, d));
}

double tosz(double x)
{
    if (x == 0.0) {
        return 0.0;
    }
    double const xh = std::log(std::fabs(x));
    double const c1 = x > 0.0 ? 10.0 : 5.5;
    double const c2 = x > 0.0 ? 7.9 : 3.1;
    return std::copysign(std::exp(xh + 0.049 * (std::sin(c1 * xh) + std::sin(c2 * xh))), x);
}

Vec tosz(Vec v)
{
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v[i] = tosz(v[i]);
    }
    return v;
}

Vec tasy(Vec v, double beta)
{
    auto const d = static_cast<std::size_t>(v.size());
    for (std::size_t i = 0; i < d; ++i) {
        double& x = v[static_cast<Eigen::Index>(i)];
        if (x > 0.0) {
            x = std::pow(x, 1.0 + beta * axis_ratio(i, d) * std::sqrt(x));
        }
    }
    return v;
}

Vec scale_lambda(Vec v, double alpha)
{
    auto const d = static_cast<std::size_t>(v.size());
    for (std::size_t i = 0; i < d; ++i) {
        v[static_cast<Eigen::Index>(i)] *= lambda_entry(alpha, i, d);
    }
    return v;
}

double fpen(Eigen::Ref<const Vec> x)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double const excess = std::fabs(x[i]) - kBound;
        if (excess > 0.0) {
            s += excess * excess;
        }
    }
    return s;
}

double rastrigin_core(Vec const& z)
{
    double cos_sum = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        cos_sum += std::cos(2.0 * kPi * z[i]);
    }
    return 10.0 * (static_cast<double>(z.size()) - cos_sum) + z.squaredNorm();
}

// Orthogonal matrix from Gram-Schmidt on a standard Gaussian matrix.
Mat random_rotation(std::size_t d, Rng& rng)
{
    Mat g(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
            g(i, j) = rng.normal();
        }
    }
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
        for (Eigen::Index k = 0; k < j; ++k) {
            g.col(j) -= g.col(j).dot(g.col(k)) * g.col(k);
        }
        g.col(j).normalize();
    }
    return g;
}

struct Peaks {
    Mat centers;        // k x d, rotated: R * y_i
    Vec weights;        // k
    Mat conditioning;   // k x d diagonal entries of C_i
};

struct State {
    int fid = 0;
    std::size_t d = 0;
    Vec xopt;
    double fopt = 0.0;
    Mat R;
    Mat Q;
    Vec signs;
    Peaks peaks;
};

Peaks make_peaks(State const& s, Rng& rng, int count, double alpha_first, double spread)
{
    auto const d = static_cast<Eigen::Index>(s.d);
    Peaks p;
    p.centers.resize(count, d);
    p.weights.resize(count);
    p.conditioning.resize(count, d);

    std::vector<double> alphas;
    int const others = count - 1;
    for (int j = 0; j < others; ++j) {
        alphas.push_back(std::pow(1000.0, 2.0 * j / static_cast<double>(others - 1)));
    }
    rng.shuffle(alphas.begin(), alphas.end());
    alphas.insert(alphas.begin(), alpha_first);

    for (int i = 0; i < count; ++i) {
        Vec y(d);
        if (i == 0) {
            y = s.xopt;
            p.weights[i] = 10.0;
        } else {
            for (Eigen::Index k = 0; k < d; ++k) {
                y[k] = rng.uniform(-spread, spread);
            }
            p.weights[i] = 1.1 + 8.0 * (i - 1) / static_cast<double>(others - 1);
        }
        p.centers.row(i) = (s.R * y).transpose();

        std::vector<double> diag(s.d);
        for (std::size_t k = 0; k < s.d; ++k) {
            diag[k] = lambda_entry(alphas[static_cast<std::size_t>(i)], k, s.d);
        }
        rng.shuffle(diag.begin(), diag.end());
        double const norm = std::pow(alphas[static_cast<std::size_t>(i)], 0.25);
        for (std::size_t k = 0; k < s.d; ++k) {
            p.conditioning(i, static_cast<Eigen::Index>(k)) = diag[k] / norm;
        }
    }
    return p;
}

double gallagher(State const& s, Vec const& x)
{
    Vec const rx = s.R * x;
    double best = -std::numeric_limits<double>::infinity();
    double const inv = 1.0 / (2.0 * static_cast<double>(s.d));
    for (Eigen::Index i = 0; i < s.peaks.centers.rows(); ++i) {
        double q = 0.0;
        for (Eigen::Index k = 0; k < rx.size(); ++k) {
            double const u = rx[k] - s.peaks.centers(i, k);
            q += s.peaks.conditioning(i, k) * u * u;
        }
        best = std::max(best, s.peaks.weights[i] * std::exp(-inv * q));
    }
    double const t = tosz(10.0 - best);
    return t * t + fpen(x);
}

double evaluate_state(State const& s, std::span<const double> xs)
{
    auto const d = static_cast<Eigen::Index>(s.d);
    auto const dd = static_cast<double>(s.d);
    Eigen::Map<const Vec> x(xs.data(), d);
    Vec const shifted = x - s.xopt;

    switch (s.fid) {
    case 1: return shifted.squaredNorm();
    case 2: {
        Vec const z = tosz(shifted);
        double f = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            f += std::pow(10.0, 6.0 * axis_ratio(static_cast<std::size_t>(i), s.d)) * z[i] * z[i];
        }
        return f;
    }
    case 3: return rastrigin_core(scale_lambda(tasy(tosz(shifted), 0.2), 10.0));
    case 4: {
        Vec z = tosz(shifted);
        for (Eigen::Index i = 0; i < d; ++i) {
            double const lam = std::pow(10.0, 0.5 * axis_ratio(static_cast<std::size_t>(i), s.d));
            z[i] *= (z[i] > 0.0 && i % 2 == 0) ? 10.0 * lam : lam;
        }
        return rastrigin_core(z) + 100.0 * fpen(x);
    }
    case 5: {
        double f = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            double const si = std::copysign(std::pow(10.0, axis_ratio(static_cast<std::size_t>(i), s.d)), s.xopt[i]);
            double const zi = s.xopt[i] * x[i] < kBound * kBound ? x[i] : s.xopt[i];
            f += 5.0 * std::fabs(si) - si * zi;
        }
        return f;
    }
    case 6: {
        Vec const z = s.Q * scale_lambda(s.R * shifted, 10.0);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            double const si = z[i] * s.xopt[i] > 0.0 ? 100.0 : 1.0;
            sum += (si * z[i]) * (si * z[i]);
        }
        return std::pow(tosz(sum), 0.9);
    }
    case 7: {
        Vec const zhat = scale_lambda(s.R * shifted, 10.0);
        Vec ztilde(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            ztilde[i] = std::fabs(zhat[i]) > 0.5 ? std::floor(0.5 + zhat[i]) : std::floor(0.5 + 10.0 * zhat[i]) / 10.0;
        }
        Vec const z = s.Q * ztilde;
        double sum = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            sum += std::pow(10.0, 2.0 * axis_ratio(static_cast<std::size_t>(i), s.d)) * z[i] * z[i];
        }
        return 0.1 * std::max(std::fabs(zhat[0]) / 1e4, sum) + fpen(x);
    }
    case 8:
    case 9: {
        double const scale = std::max(1.0, std::sqrt(dd) / 8.0);
        Vec const z = s.fid == 8 ? Vec((scale * shifted).array() + 1.0) : Vec((scale * (s.R * x)).array() + 0.5);
        double f = 0.0;
        for (Eigen::Index i = 0; i + 1 < d; ++i) {
            double const a = z[i] * z[i] - z[i + 1];
            f += 100.0 * a * a + (z[i] - 1.0) * (z[i] - 1.0);
        }
        return f;
    }
    case 10: {
        Vec const z = tosz(s.R * shifted);
        double f = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            f += std::pow(10.0, 6.0 * axis_ratio(static_cast<std::size_t>(i), s.d)) * z[i] * z[i];
        }
        return f;
    }
    case 11: {
        Vec const z = tosz(s.R * shifted);
        return 1e6 * z[0] * z[0] + (z.squaredNorm() - z[0] * z[0]);
    }
    case 12: {
        Vec const z = s.R * tasy(s.R * shifted, 0.5);
        return z[0] * z[0] + 1e6 * (z.squaredNorm() - z[0] * z[0]);
    }
    case 13: {
        Vec const z = s.Q * scale_lambda(s.R * shifted, 10.0);
        return z[0] * z[0] + 100.0 * std::sqrt(std::max(0.0, z.squaredNorm() - z[0] * z[0]));
    }
    case 14: {
        Vec const z = s.R * shifted;
        double sum = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            sum += std::pow(std::fabs(z[i]), 2.0 + 4.0 * axis_ratio(static_cast<std::size_t>(i), s.d));
        }
        return std::sqrt(sum);
    }
    case 15: return rastrigin_core(s.R * scale_lambda(s.Q * tasy(tosz(s.R * shifted), 0.2), 10.0));
    case 16: {
        Vec const z = s.R * scale_lambda(s.Q * tosz(s.R * shifted), 0.01);
        double f0 = 0.0;
        for (int k = 0; k <= 11; ++k) {
            f0 += std::pow(0.5, k) * std::cos(kPi * std::pow(3.0, k));
        }
        double sum = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            for (int k = 0; k <= 11; ++k) {
                sum += std::pow(0.5, k) * std::cos(2.0 * kPi * std::pow(3.0, k) * (z[i] + 0.5));
            }
        }
        double const inner = sum / dd - f0;
        return 10.0 * inner * inner * inner + 10.0 / dd * fpen(x);
    }
    case 17:
    case 18: {
        double const alpha = s.fid == 17 ? 10.0 : 1000.0;
        Vec const z = scale_lambda(s.Q * tasy(s.R * shifted, 0.5), alpha);
        double sum = 0.0;
        for (Eigen::Index i = 0; i + 1 < d; ++i) {
            double const si = std::sqrt(z[i] * z[i] + z[i + 1] * z[i + 1]);
            double const sn = std::sin(50.0 * std::pow(si, 0.2));
            sum += std::sqrt(si) + std::sqrt(si) * sn * sn;
        }
        double const mean = d > 1 ? sum / (dd - 1.0) : 0.0;
        return mean * mean + 10.0 * fpen(x);
    }
    case 19: {
        double const scale = std::max(1.0, std::sqrt(dd) / 8.0);
        Vec const z = (scale * (s.R * x)).array() + 0.5;
        if (d < 2) {
            return 0.0;
        }
        double sum = 0.0;
        for (Eigen::Index i = 0; i + 1 < d; ++i) {
            double const a = z[i] * z[i] - z[i + 1];
            double const si = 100.0 * a * a + (z[i] - 1.0) * (z[i] - 1.0);
            sum += si / 4000.0 - std::cos(si);
        }
        return 10.0 / (dd - 1.0) * sum + 10.0;
    }
    case 20: {
        Vec const xhat = 2.0 * s.signs.cwiseProduct(x);
        Vec const two_abs = 2.0 * s.xopt.cwiseAbs();
        Vec zhat = xhat;
        for (Eigen::Index i = 1; i < d; ++i) {
            zhat[i] = xhat[i] + 0.25 * (xhat[i - 1] - two_abs[i - 1]);
        }
        Vec const z = 100.0 * (scale_lambda(zhat - two_abs, 10.0) + two_abs);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            sum += z[i] * std::sin(std::sqrt(std::fabs(z[i])));
        }
        return -sum / (100.0 * dd) + 4.189828872724339 + 100.0 * fpen(z / 100.0);
    }
    case 21:
    case 22: return gallagher(s, x);
    case 23: {
        Vec const z = s.Q * scale_lambda(s.R * shifted, 100.0);
        double const exponent = 10.0 / std::pow(dd, 1.2);
        double prod = 1.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            double inner = 0.0;
            for (int j = 1; j <= 32; ++j) {
                double const p = std::ldexp(1.0, j);
                double const v = p * z[i];
                inner += std::fabs(v - std::nearbyint(v)) / p;
            }
            prod *= std::pow(1.0 + static_cast<double>(i + 1) * inner, exponent);
        }
        return 10.0 / (dd * dd) * (prod - 1.0) + fpen(x);
    }
    case 24: {
        constexpr double mu0 = 2.5;
        constexpr double depth = 1.0;
        double const sfac = 1.0 - 1.0 / (2.0 * std::sqrt(dd + 20.0) - 8.2);
        double const mu1 = -std::sqrt((mu0 * mu0 - depth) / sfac);
        Vec const xhat = 2.0 * s.signs.cwiseProduct(x);
        Vec const z = s.Q * scale_lambda(s.R * (xhat.array() - mu0).matrix(), 100.0);
        double const sphere0 = (xhat.array() - mu0).square().sum();
        double const sphere1 = depth * dd + sfac * (xhat.array() - mu1).square().sum();
        double cos_sum = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            cos_sum += std::cos(2.0 * kPi * z[i]);
        }
        return std::min(sphere0, sphere1) + 10.0 * (dd - cos_sum) + 1e4 * fpen(x);
    }
    default: break;
    }
    throw std::out_of_range("unknown BBOB function id");
}

constexpr std::string_view kNames[] = {
    "sphere", "ellipsoid_separable", "rastrigin_separable", "bueche_rastrigin", "linear_slope",
    "attractive_sector", "step_ellipsoid", "rosenbrock", "rosenbrock_rotated", "ellipsoid",
    "discus", "bent_cigar", "sharp_ridge", "different_powers", "rastrigin",
    "weierstrass", "schaffers_f7", "schaffers_f7_ill_conditioned", "griewank_rosenbrock", "schwefel",
    "gallagher_101_peaks", "gallagher_21_peaks", "katsuura", "lunacek_bi_rastrigin"};

} // namespace

std::string_view function_name(int function_id)
{
    if (function_id < 1 || function_id > kFunctionCount) {
        throw std::out_of_range("BBOB function id must be in 1..24, got " + std::to_string(function_id));
    }
    return kNames[function_id - 1];
}

Problem instantiate(int function_id, int instance_id, std::size_t dim)
{
    if (function_id < 1 || function_id > kFunctionCount) {
        throw std::out_of_range("BBOB function id must be in 1..24, got " + std::to_string(function_id));
    }
    if (instance_id < 1) {
        throw std::out_of_range("BBOB instance id must be positive, got " + std::to_string(instance_id));
    }
    if (dim == 0) {
        throw std::out_of_range("BBOB dimension must be positive");
    }

    auto state = std::make_shared<State>();
    State& s = *state;
    s.fid = function_id;
    s.d = dim;
    auto const d = static_cast<Eigen::Index>(dim);
    std::uint64_t const seed = derive_seed(kSeedSalt, {static_cast<std::uint64_t>(function_id),
                                                       static_cast<std::uint64_t>(instance_id), dim});
    Rng rng(seed);

    s.xopt.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        double v = std::round(rng.uniform(-4.0, 4.0) * 1e4) / 1e4;
        s.xopt[i] = v == 0.0 ? -1e-5 : v;
    }
    s.fopt = std::round(std::clamp(100.0 * rng.normal(), -1000.0, 1000.0) * 100.0) / 100.0;
    s.R = random_rotation(dim, rng);
    s.Q = random_rotation(dim, rng);
    s.signs.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        s.signs[i] = rng.bernoulli(0.5) ? 1.0 : -1.0;
    }

    double const scale = std::max(1.0, std::sqrt(static_cast<double>(dim)) / 8.0);
    switch (function_id) {
    case 5: s.xopt = kBound * s.signs; break;
    case 8: s.xopt *= 0.75; break;
    case 9:
    case 19: s.xopt = s.R.transpose() * Vec::Constant(d, 0.5 / scale); break;
    case 20: s.xopt = (4.2096874633 / 2.0) * s.signs; break;
    case 21: s.peaks = make_peaks(s, rng, 101, 1000.0, 5.0); break;
    case 22:
        s.xopt *= 0.98;
        s.peaks = make_peaks(s, rng, 21, 1000.0 * 1000.0, 4.9);
        break;
    case 24: s.xopt = 1.25 * s.signs; break;
    default: break;
    }

    Instance meta;
    meta.function_id = function_id;
    meta.instance_id = instance_id;
    meta.dim = dim;
    meta.x_opt.assign(s.xopt.data(), s.xopt.data() + d);
    meta.f_opt = s.fopt;
    meta.seed = seed;

    std::string id = "bbob_f" + std::to_string(function_id) + "_i" + std::to_string(instance_id) + "_d" + std::to_string(dim);
    ObjectiveFunction f(std::move(id), Domain::box(dim, -kBound, kBound),
                        [state](std::span<const double> x) { return evaluate_state(*state, x) + state->fopt; });
    return {std::move(meta), std::move(f)};
}

std::pair<std::vector<double>, double> optimum(Instance const& instance)
{
    return {instance.x_opt, instance.f_opt};
}

} // namespace lforge::bbob
