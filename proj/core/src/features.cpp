#include "lforge/features.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <Eigen/Dense>

#include "lforge/rng.hpp"
#include "lforge/util.hpp"

namespace lforge {

namespace {

constexpr std::array<int, 4> kDispQuantiles = {2, 5, 10, 25};

std::vector<std::string> build_schema()
{
    std::vector<std::string> s = {
        "ela_meta.lin_simple.adj_r2",
        "ela_meta.lin_simple.intercept",
        "ela_meta.lin_simple.coef.min",
        "ela_meta.lin_simple.coef.max",
        "ela_meta.lin_simple.coef.max_by_min",
        "ela_meta.lin_w_interact.adj_r2",
        "ela_meta.quad_simple.adj_r2",
        "ela_meta.quad_simple.cond",
        "ela_meta.quad_w_interact.adj_r2",
        "ela_distr.skewness",
        "ela_distr.kurtosis",
        "ela_distr.number_of_peaks",
        "nbc.nn_nb.sd_ratio",
        "nbc.nn_nb.mean_ratio",
        "nbc.nn_nb.cor",
        "nbc.dist_ratio.coeff_var",
        "nbc.nb_fitness.cor",
    };
    for (char const* stat : {"ratio_mean", "ratio_median", "diff_mean", "diff_median"}) {
        for (int q : kDispQuantiles) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "%02d", q);
            s.push_back(std::string("disp.") + stat + "_" + buf);
        }
    }
    for (char const* kind : {"expl_var", "expl_var_PC1"}) {
        for (char const* src : {"cov_x", "cor_x", "cov_init", "cor_init"}) {
            s.push_back(std::string("pca.") + kind + "." + src);
        }
    }
    for (char const* name : {"h_max", "eps_s", "eps_max", "eps_ratio", "m0"}) {
        s.push_back(std::string("ic.") + name);
    }
    return s;
}

/// Output slots in schema order.
struct Sink {
    std::vector<double>& out;
    std::size_t pos = 0;
    void put(double v) { out[pos++] = std::isfinite(v) ? v : kMissing; }
};

double mean_of(std::span<const double> v)
{
    if (v.empty()) {
        return kMissing;
    }
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v)
{
    if (v.size() < 2) {
        return kMissing;
    }
    double const m = mean_of(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double pearson(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size() || a.size() < 2) {
        return kMissing;
    }
    double const ma = mean_of(a);
    double const mb = mean_of(b);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) {
        return kMissing;
    }
    return sab / std::sqrt(saa * sbb);
}

double median_inplace(std::vector<double>& v)
{
    if (v.empty()) {
        return kMissing;
    }
    auto const mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double const hi = v[mid];
    if (v.size() % 2 == 1) {
        return hi;
    }
    double const lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

/// Quantile of sorted data, linear interpolation between order statistics.
double quantile_sorted(std::span<const double> sorted, double q)
{
    double const h = (static_cast<double>(sorted.size()) - 1.0) * q;
    auto const lo = static_cast<std::size_t>(std::floor(h));
    auto const hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Condensed upper-triangular Euclidean distance matrix.
class PairDistances {
public:
    explicit PairDistances(Points const& x) : n_(static_cast<std::size_t>(x.rows()))
    {
        d_.resize(n_ * (n_ - 1) / 2);
        auto const dim = x.cols();
        std::size_t k = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            double const* xi = x.data() + static_cast<Eigen::Index>(i) * dim;
            for (std::size_t j = i + 1; j < n_; ++j) {
                double const* xj = x.data() + static_cast<Eigen::Index>(j) * dim;
                double s = 0.0;
                for (Eigen::Index c = 0; c < dim; ++c) {
                    double const t = xi[c] - xj[c];
                    s += t * t;
                }
                d_[k++] = std::sqrt(s);
            }
        }
    }

    std::size_t n() const noexcept { return n_; }
    std::vector<double> const& condensed() const noexcept { return d_; }

    double operator()(std::size_t i, std::size_t j) const noexcept
    {
        if (i == j) {
            return 0.0;
        }
        if (i > j) {
            std::swap(i, j);
        }
        return d_[i * n_ - i * (i + 1) / 2 + (j - i - 1)];
    }

private:
    std::size_t n_;
    std::vector<double> d_;
};

// ---------------------------------------------------------------------------
// ela_meta

struct Fit {
    Eigen::VectorXd coef;
    double r2 = kMissing;
    double adj_r2 = kMissing;
};

Fit least_squares(Eigen::MatrixXd const& design, Eigen::VectorXd const& y)
{
    Fit fit;
    auto const n = static_cast<double>(design.rows());
    auto const p = static_cast<double>(design.cols() - 1);
    fit.coef = design.colPivHouseholderQr().solve(y);
    Eigen::VectorXd const resid = y - design * fit.coef;
    double const sse = resid.squaredNorm();
    double const sst = (y.array() - y.mean()).square().sum();
    if (sst <= 0.0) {
        return fit;
    }
    fit.r2 = 1.0 - sse / sst;
    if (n - p - 1.0 > 0.0) {
        fit.adj_r2 = 1.0 - (1.0 - fit.r2) * (n - 1.0) / (n - p - 1.0);
    }
    return fit;
}

void ela_meta(Points const& x, Eigen::VectorXd const& y, Sink& sink)
{
    auto const n = x.rows();
    auto const d = x.cols();
    Eigen::Index const n_inter = d * (d - 1) / 2;

    Eigen::MatrixXd lin(n, 1 + d);
    lin.col(0).setOnes();
    lin.rightCols(d) = x;

    Eigen::MatrixXd inter(n, n_inter);
    for (Eigen::Index i = 0, c = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j, ++c) {
            inter.col(c) = x.col(i).cwiseProduct(x.col(j));
        }
    }
    Eigen::MatrixXd const squares = x.array().square();

    Fit const lin_simple = least_squares(lin, y);
    sink.put(lin_simple.adj_r2);
    sink.put(lin_simple.coef[0]);
    Eigen::VectorXd const lin_abs = lin_simple.coef.tail(d).cwiseAbs();
    double const cmin = lin_abs.minCoeff();
    double const cmax = lin_abs.maxCoeff();
    sink.put(cmin);
    sink.put(cmax);
    sink.put(cmin > 0.0 ? cmax / cmin : kMissing);

    Eigen::MatrixXd lin_w(n, 1 + d + n_inter);
    lin_w << lin, inter;
    sink.put(least_squares(lin_w, y).adj_r2);

    Eigen::MatrixXd quad(n, 1 + 2 * d);
    quad << lin, squares;
    Fit const quad_simple = least_squares(quad, y);
    sink.put(quad_simple.adj_r2);
    Eigen::VectorXd const quad_abs = quad_simple.coef.tail(d).cwiseAbs();
    double const qmin = quad_abs.minCoeff();
    sink.put(qmin > 0.0 ? quad_abs.maxCoeff() / qmin : kMissing);

    Eigen::MatrixXd quad_w(n, 1 + 2 * d + n_inter);
    quad_w << lin, squares, inter;
    sink.put(least_squares(quad_w, y).adj_r2);
}

// ---------------------------------------------------------------------------
// ela_distr

double count_peaks(std::span<const double> y, FeatureOptions const& opt)
{
    std::vector<double> sorted(y.begin(), y.end());
    std::sort(sorted.begin(), sorted.end());
    auto const n = sorted.size();
    double const sd = sample_sd(sorted);
    double const iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) {
        spread = sd > 0.0 ? sd : 1.0;
    }
    double const bw = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
    double const lo = sorted.front() - 3.0 * bw;
    double const hi = sorted.back() + 3.0 * bw;
    std::size_t const g = opt.peaks_grid;
    double const step = (hi - lo) / static_cast<double>(g - 1);
    double const norm = 1.0 / (static_cast<double>(n) * bw * std::sqrt(2.0 * std::numbers::pi));
    std::vector<double> dens(g, 0.0);
    double const cutoff = 8.0 * bw;
    for (std::size_t k = 0; k < g; ++k) {
        double const t = lo + step * static_cast<double>(k);
        auto first = std::lower_bound(sorted.begin(), sorted.end(), t - cutoff);
        auto last = std::upper_bound(first, sorted.end(), t + cutoff);
        double s = 0.0;
        for (auto it = first; it != last; ++it) {
            double const u = (t - *it) / bw;
            s += std::exp(-0.5 * u * u);
        }
        dens[k] = s * norm;
    }
    std::vector<std::size_t> minima{0};
    for (std::size_t k = 1; k + 1 < g; ++k) {
        if (dens[k] < dens[k - 1] && dens[k] < dens[k + 1]) {
            minima.push_back(k);
        }
    }
    minima.push_back(g - 1);
    int peaks = 0;
    for (std::size_t m = 0; m + 1 < minima.size(); ++m) {
        double mass = 0.0;
        for (std::size_t k = minima[m]; k <= minima[m + 1]; ++k) {
            mass += dens[k];
        }
        if (mass * step > opt.peaks_mode_mass) {
            ++peaks;
        }
    }
    return peaks;
}

void ela_distr(std::span<const double> y, FeatureOptions const& opt, Sink& sink)
{
    double const m = mean_of(y);
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    for (double v : y) {
        double const t = v - m;
        m2 += t * t;
        m3 += t * t * t;
        m4 += t * t * t * t;
    }
    auto const n = static_cast<double>(y.size());
    m2 /= n;
    m3 /= n;
    m4 /= n;
    sink.put(m3 / std::pow(m2, 1.5));
    sink.put(m4 / (m2 * m2) - 3.0);
    sink.put(count_peaks(y, opt));
}

// ---------------------------------------------------------------------------
// nbc

void nbc(PairDistances const& dist, std::span<const double> y, Sink& sink)
{
    std::size_t const n = dist.n();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> nn(n, inf);
    std::vector<double> nb(n, inf);
    std::vector<std::size_t> nb_index(n, n);
    auto const& cd = dist.condensed();
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j, ++k) {
            double const dij = cd[k];
            if (dij < nn[i]) {
                nn[i] = dij;
            }
            if (dij < nn[j]) {
                nn[j] = dij;
            }
            if (y[j] < y[i] && dij < nb[i]) {
                nb[i] = dij;
                nb_index[i] = j;
            } else if (y[i] < y[j] && dij < nb[j]) {
                nb[j] = dij;
                nb_index[j] = i;
            }
        }
    }
    std::vector<double> nn_valid;
    std::vector<double> nb_valid;
    std::vector<double> ratio;
    std::vector<double> indegree(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (nb_index[i] == n) {
            continue;
        }
        nn_valid.push_back(nn[i]);
        nb_valid.push_back(nb[i]);
        if (nb[i] > 0.0) {
            ratio.push_back(nn[i] / nb[i]);
        }
        indegree[nb_index[i]] += 1.0;
    }
    double const sd_nb = sample_sd(nb_valid);
    sink.put(sd_nb > 0.0 ? sample_sd(nn) / sd_nb : kMissing);
    double const mean_nb = mean_of(nb_valid);
    sink.put(mean_nb > 0.0 ? mean_of(nn) / mean_nb : kMissing);
    sink.put(pearson(nn_valid, nb_valid));
    double const mean_ratio = mean_of(ratio);
    sink.put(mean_ratio > 0.0 ? sample_sd(ratio) / mean_ratio : kMissing);
    sink.put(pearson(indegree, y));
}

// ---------------------------------------------------------------------------
// disp

void disp(PairDistances const& dist, std::span<const double> y, Sink& sink)
{
    std::size_t const n = dist.n();
    auto const& cd = dist.condensed();
    double const full_mean = mean_of(cd);
    std::vector<double> scratch(cd.begin(), cd.end());
    double const full_median = median_inplace(scratch);

    std::vector<double> sorted(y.begin(), y.end());
    std::sort(sorted.begin(), sorted.end());

    std::array<double, 4> mean_q{};
    std::array<double, 4> median_q{};
    for (std::size_t qi = 0; qi < kDispQuantiles.size(); ++qi) {
        double const threshold = quantile_sorted(sorted, kDispQuantiles[qi] / 100.0);
        std::vector<std::size_t> best;
        for (std::size_t i = 0; i < n; ++i) {
            if (y[i] <= threshold) {
                best.push_back(i);
            }
        }
        std::vector<double> sub;
        sub.reserve(best.size() * (best.size() - (best.empty() ? 0 : 1)) / 2);
        for (std::size_t a = 0; a < best.size(); ++a) {
            for (std::size_t b = a + 1; b < best.size(); ++b) {
                sub.push_back(dist(best[a], best[b]));
            }
        }
        mean_q[qi] = sub.empty() ? kMissing : mean_of(sub);
        median_q[qi] = sub.empty() ? kMissing : median_inplace(sub);
    }
    for (std::size_t qi = 0; qi < 4; ++qi) {
        sink.put(mean_q[qi] / full_mean);
    }
    for (std::size_t qi = 0; qi < 4; ++qi) {
        sink.put(median_q[qi] / full_median);
    }
    for (std::size_t qi = 0; qi < 4; ++qi) {
        sink.put(mean_q[qi] - full_mean);
    }
    for (std::size_t qi = 0; qi < 4; ++qi) {
        sink.put(median_q[qi] - full_median);
    }
}

// ---------------------------------------------------------------------------
// pca

std::pair<double, double> explained_variance(Eigen::MatrixXd const& data, bool correlation)
{
    Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
    if (correlation) {
        for (Eigen::Index c = 0; c < centered.cols(); ++c) {
            double const norm = centered.col(c).norm();
            if (!(norm > 0.0)) {
                return {kMissing, kMissing};
            }
            centered.col(c) /= norm;
        }
    }
    Eigen::MatrixXd const cov = centered.transpose() * centered;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
    Eigen::VectorXd ev = solver.eigenvalues().reverse().cwiseMax(0.0);
    double const total = ev.sum();
    if (!(total > 0.0)) {
        return {kMissing, kMissing};
    }
    double cum = 0.0;
    Eigen::Index needed = ev.size();
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        cum += ev[k];
        if (cum / total >= 0.9) {
            needed = k + 1;
            break;
        }
    }
    return {static_cast<double>(needed) / static_cast<double>(ev.size()), ev[0] / total};
}

void pca(Points const& x, Eigen::VectorXd const& y, Sink& sink)
{
    Eigen::MatrixXd const xs = x;
    Eigen::MatrixXd init(x.rows(), x.cols() + 1);
    init << xs, y;
    auto const cov_x = explained_variance(xs, false);
    auto const cor_x = explained_variance(xs, true);
    auto const cov_init = explained_variance(init, false);
    auto const cor_init = explained_variance(init, true);
    sink.put(cov_x.first);
    sink.put(cor_x.first);
    sink.put(cov_init.first);
    sink.put(cor_init.first);
    sink.put(cov_x.second);
    sink.put(cor_x.second);
    sink.put(cov_init.second);
    sink.put(cor_init.second);
}

// ---------------------------------------------------------------------------
// ic

struct IcLevel {
    double entropy;
    double partial;
};

IcLevel ic_level(std::span<const double> slopes, double eps)
{
    auto const m = slopes.size();
    auto symbol = [eps](double v) { return v < -eps ? 0 : (v > eps ? 2 : 1); };
    std::array<std::size_t, 9> counts{};
    int prev = symbol(slopes[0]);
    int last_nonzero = prev == 1 ? -1 : prev;
    std::size_t collapsed = prev == 1 ? 0 : 1;
    for (std::size_t k = 1; k < m; ++k) {
        int const cur = symbol(slopes[k]);
        ++counts[static_cast<std::size_t>(prev * 3 + cur)];
        if (cur != 1 && cur != last_nonzero) {
            ++collapsed;
            last_nonzero = cur;
        }
        prev = cur;
    }
    double h = 0.0;
    double const pairs = static_cast<double>(m - 1);
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            if (a == b) {
                continue;
            }
            double const p = static_cast<double>(counts[static_cast<std::size_t>(a * 3 + b)]) / pairs;
            if (p > 0.0) {
                h -= p * std::log(p) / std::log(6.0);
            }
        }
    }
    return {h, static_cast<double>(collapsed) / static_cast<double>(m)};
}

void ic(PairDistances const& dist, std::span<const double> y, std::uint64_t seed, FeatureOptions const& opt, Sink& sink)
{
    std::size_t const n = dist.n();
    Rng rng(derive_seed(seed, {0x1c}));
    std::size_t current = static_cast<std::size_t>(rng.below(n));
    std::vector<char> visited(n, 0);
    visited[current] = 1;
    std::vector<double> slopes;
    slopes.reserve(n);
    for (std::size_t step = 1; step < n; ++step) {
        std::size_t best = n;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (!visited[j]) {
                double const dj = dist(current, j);
                if (dj < best_d) {
                    best_d = dj;
                    best = j;
                }
            }
        }
        visited[best] = 1;
        if (best_d > 0.0) {
            slopes.push_back((y[best] - y[current]) / best_d);
        }
        current = best;
    }
    if (slopes.size() < 3) {
        for (int k = 0; k < 5; ++k) {
            sink.put(kMissing);
        }
        return;
    }
    double max_abs = 0.0;
    for (double s : slopes) {
        max_abs = std::max(max_abs, std::fabs(s));
    }
    double const m0 = ic_level(slopes, 0.0).partial;
    double lo = opt.ic_eps_min;
    if (!(max_abs > lo)) {
        lo = max_abs * 1e-2;
    }
    double const log_lo = std::log10(lo);
    double const log_hi = std::log10(max_abs);
    std::size_t const levels = opt.ic_levels;

    double h_max = -1.0;
    double eps_max = kMissing;
    double eps_s = kMissing;
    double eps_ratio = kMissing;
    for (std::size_t k = 0; k < levels; ++k) {
        double const log_eps = levels > 1 ? log_lo + (log_hi - log_lo) * static_cast<double>(k) / static_cast<double>(levels - 1) : log_hi;
        auto const level = ic_level(slopes, std::pow(10.0, log_eps));
        if (level.entropy > h_max) {
            h_max = level.entropy;
            eps_max = log_eps;
        }
        if (std::isnan(eps_s) && level.entropy < opt.ic_settling_threshold) {
            eps_s = log_eps;
        }
        if (std::isnan(eps_ratio) && level.partial < opt.ic_partial_ratio * m0) {
            eps_ratio = log_eps;
        }
    }
    sink.put(h_max);
    sink.put(eps_s);
    sink.put(eps_max);
    sink.put(eps_ratio);
    sink.put(m0);
}

} // namespace

std::vector<std::string> const& feature_schema()
{
    static std::vector<std::string> const schema = build_schema();
    return schema;
}

std::optional<double> FeatureVector::get(std::string_view name) const
{
    for (std::size_t k = 0; k < names.size(); ++k) {
        if (names[k] == name) {
            return values[k];
        }
    }
    return std::nullopt;
}

FeatureVector compute_features(Points const& x, std::span<const double> y, std::uint64_t seed,
                               FeatureOptions const& options)
{
    auto const& schema = feature_schema();
    FeatureVector fv;
    fv.names = schema;
    fv.values.assign(schema.size(), kMissing);
    fv.dim = static_cast<std::size_t>(x.cols());
    fv.sample_size = static_cast<std::size_t>(x.rows());
    fv.seed = seed;
    if (static_cast<std::size_t>(x.rows()) != y.size()) {
        throw std::invalid_argument("compute_features: point and value counts differ");
    }
    if (y.size() < 4 || x.cols() < 1) {
        throw std::invalid_argument("compute_features needs at least 4 points");
    }
    auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (!(*hi > *lo)) {
        fv.degenerate = true;
        return fv;
    }

    Eigen::VectorXd const yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    PairDistances const dist(x);
    Sink sink{fv.values};
    ela_meta(x, yv, sink);
    ela_distr(y, options, sink);
    nbc(dist, y, sink);
    disp(dist, y, sink);
    pca(x, yv, sink);
    ic(dist, y, seed, options, sink);
    return fv;
}

FeatureVector averaged_features(ObjectiveFunction const& f, AveragingConfig const& config)
{
    if (config.repetitions < 1) {
        throw std::invalid_argument("averaged_features needs repetitions >= 1");
    }
    std::size_t const d = f.dim();
    std::size_t const n = config.sample_factor * d;
    auto const& schema = feature_schema();
    std::vector<double> sum(schema.size(), 0.0);
    std::vector<std::size_t> count(schema.size(), 0);
    std::size_t usable = 0;
    for (std::size_t r = 0; r < config.repetitions; ++r) {
        std::uint64_t const seed = derive_seed(config.seed, {r});
        SamplerConfig sc{config.sampler, n, 0, seed};
        Points x = sample(sc, f.domain());
        auto const raw = evaluate_batch(f, x);
        auto const norm = normalize_objective(raw);
        if (norm.degenerate) {
            continue;
        }
        ++usable;
        auto const fv = compute_features(x, norm.values, seed, config.options);
        for (std::size_t k = 0; k < schema.size(); ++k) {
            if (!fv.missing(k)) {
                sum[k] += fv.values[k];
                ++count[k];
            }
        }
    }
    if (usable == 0) {
        throw DegenerateFunction("function '" + f.id() + "' is constant on every sample");
    }
    FeatureVector out;
    out.names = schema;
    out.values.resize(schema.size());
    for (std::size_t k = 0; k < schema.size(); ++k) {
        out.values[k] = count[k] > 0 ? sum[k] / static_cast<double>(count[k]) : kMissing;
    }
    out.dim = d;
    out.sample_size = n;
    out.seed = config.seed;
    return out;
}

FeatureVector concat_features(std::span<const FeatureVector> parts)
{
    FeatureVector out;
    for (auto const& p : parts) {
        std::string const prefix = "d" + std::to_string(p.dim) + ".";
        for (std::size_t k = 0; k < p.size(); ++k) {
            out.names.push_back(prefix + p.names[k]);
            out.values.push_back(p.values[k]);
        }
        out.dim = std::max(out.dim, p.dim);
        out.sample_size += p.sample_size;
        out.degenerate = out.degenerate || p.degenerate;
    }
    if (!parts.empty()) {
        out.seed = parts.front().seed;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scaler

bool is_unstable_feature(std::string_view name) noexcept
{
    if (name.size() > 1 && name[0] == 'd') {
        auto const dot = name.find('.');
        if (dot != std::string_view::npos && dot > 1 &&
            std::all_of(name.begin() + 1, name.begin() + static_cast<std::ptrdiff_t>(dot),
                        [](char c) { return c >= '0' && c <= '9'; })) {
            name.remove_prefix(dot + 1);
        }
    }
    return std::find(kUnstableFeatures.begin(), kUnstableFeatures.end(), name) != kUnstableFeatures.end();
}

FeatureScaler FeatureScaler::fit(std::span<const FeatureVector> corpus, double max_missing_fraction)
{
    if (corpus.size() < 2) {
        throw std::invalid_argument("fit_scaler needs a corpus of at least 2 vectors");
    }
    auto const& names = corpus.front().names;
    for (auto const& v : corpus) {
        if (v.names != names) {
            throw SchemaMismatch("fit_scaler: corpus vectors have different schemas");
        }
    }
    FeatureScaler scaler;
    auto const rows = static_cast<double>(corpus.size());
    for (std::size_t k = 0; k < names.size(); ++k) {
        if (is_unstable_feature(names[k])) {
            scaler.dropped_.push_back(names[k]);
            continue;
        }
        std::vector<double> present;
        present.reserve(corpus.size());
        for (auto const& v : corpus) {
            if (std::isfinite(v.values[k])) {
                present.push_back(v.values[k]);
            }
        }
        double const missing_fraction = 1.0 - static_cast<double>(present.size()) / rows;
        if (missing_fraction > max_missing_fraction || present.empty()) {
            scaler.dropped_.push_back(names[k]);
            continue;
        }
        double const m = mean_of(present);
        double ss = 0.0;
        for (double x : present) {
            ss += (x - m) * (x - m);
        }
        double const sd = std::sqrt(ss / static_cast<double>(present.size()));
        if (!(sd > 1e-12 * std::max(1.0, std::fabs(m)))) {
            scaler.dropped_.push_back(names[k]);
            continue;
        }
        scaler.columns_.push_back({names[k], m, sd});
    }
    scaler.rehash();
    return scaler;
}

void FeatureScaler::rehash()
{
    std::uint64_t h = fnv1a("schema:" + std::to_string(schema_version_));
    for (auto const& c : columns_) {
        h = fnv1a(c.name, fnv1a("|", h));
    }
    schema_hash_ = h;
}

std::vector<std::string> FeatureScaler::names() const
{
    std::vector<std::string> out;
    out.reserve(columns_.size());
    for (auto const& c : columns_) {
        out.push_back(c.name);
    }
    return out;
}

StandardizedFeatures FeatureScaler::standardize(FeatureVector const& v) const
{
    std::unordered_map<std::string_view, std::size_t> index;
    index.reserve(v.names.size());
    for (std::size_t k = 0; k < v.names.size(); ++k) {
        index.emplace(v.names[k], k);
    }
    StandardizedFeatures out;
    out.schema_hash = schema_hash_;
    out.values.reserve(columns_.size());
    for (auto const& c : columns_) {
        auto it = index.find(c.name);
        if (it == index.end()) {
            throw SchemaMismatch("feature '" + c.name + "' required by the scaler is absent");
        }
        double const x = v.values[it->second];
        out.values.push_back(std::isfinite(x) ? (x - c.mean) / c.std : 0.0);
    }
    return out;
}

nlohmann::json FeatureScaler::to_json() const
{
    nlohmann::json cols = nlohmann::json::array();
    for (auto const& c : columns_) {
        cols.push_back({{"name", c.name}, {"mean", c.mean}, {"std", c.std}});
    }
    return {{"schema_version", schema_version_},
            {"schema_hash", hex64(schema_hash_)},
            {"columns", cols},
            {"dropped", dropped_}};
}

FeatureScaler FeatureScaler::from_json(nlohmann::json const& j)
{
    FeatureScaler s;
    s.schema_version_ = j.at("schema_version").get<int>();
    if (s.schema_version_ != kFeatureSchemaVersion) {
        throw SchemaMismatch("scaler schema version " + std::to_string(s.schema_version_) +
                             " differs from library version " + std::to_string(kFeatureSchemaVersion));
    }
    for (auto const& c : j.at("columns")) {
        s.columns_.push_back({c.at("name").get<std::string>(), c.at("mean").get<double>(), c.at("std").get<double>()});
    }
    if (j.contains("dropped")) {
        s.dropped_ = j.at("dropped").get<std::vector<std::string>>();
    }
    s.rehash();
    if (j.contains("schema_hash") && j.at("schema_hash").get<std::string>() != hex64(s.schema_hash_)) {
        throw SchemaMismatch("scaler schema hash does not match its columns");
    }
    return s;
}

double ela_distance(StandardizedFeatures const& a, StandardizedFeatures const& b)
{
    if (a.schema_hash != b.schema_hash || a.values.size() != b.values.size()) {
        throw SchemaMismatch("ela_distance: vectors come from different feature schemas");
    }
    double s = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        s += std::fabs(a.values[k] - b.values[k]);
    }
    return s;
}

// ---------------------------------------------------------------------------
// CSV tables

void write_feature_table(std::ostream& os, std::span<const std::string> ids, std::span<const FeatureVector> rows)
{
    if (ids.size() != rows.size()) {
        throw std::invalid_argument("write_feature_table: ids and rows differ in length");
    }
    os << "schema_version,id,dim,sample_size,seed,degenerate";
    if (!rows.empty()) {
        for (auto const& name : rows.front().names) {
            os << ',' << name;
        }
    }
    os << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto const& v = rows[r];
        if (v.names != rows.front().names) {
            throw SchemaMismatch("write_feature_table: rows have different schemas");
        }
        os << kFeatureSchemaVersion << ',' << csv_cell(ids[r]) << ',' << v.dim << ',' << v.sample_size << ',' << v.seed << ','
           << (v.degenerate ? 1 : 0);
        for (double x : v.values) {
            os << ',' << format_double(x);
        }
        os << '\n';
    }
}

FeatureTable read_feature_table(std::istream& is)
{
    FeatureTable table;
    std::string line;
    if (!std::getline(is, line)) {
        throw std::invalid_argument("feature table is empty");
    }
    auto header = split_csv_line(line);
    constexpr std::size_t kMeta = 6;
    if (header.size() < kMeta || header[0] != "schema_version") {
        throw std::invalid_argument("feature table header is malformed");
    }
    std::vector<std::string> names(header.begin() + kMeta, header.end());
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw std::invalid_argument("feature table row has " + std::to_string(cells.size()) + " cells, expected " +
                                        std::to_string(header.size()));
        }
        if (std::stoi(cells[0]) != kFeatureSchemaVersion) {
            throw SchemaMismatch("feature table schema version " + cells[0] + " is not supported");
        }
        FeatureVector v;
        v.names = names;
        v.dim = std::stoul(cells[2]);
        v.sample_size = std::stoul(cells[3]);
        v.seed = std::stoull(cells[4]);
        v.degenerate = cells[5] == "1";
        for (std::size_t k = kMeta; k < cells.size(); ++k) {
            v.values.push_back(parse_double(cells[k]));
        }
        table.ids.push_back(cells[1]);
        table.rows.push_back(std::move(v));
    }
    return table;
}

} // namespace lforge
