#pragma once

// Post-processing of trajectories: battery magnetization, quasi-steady
// currents, log-space scaling fits, regime labels and the fidelity witness.

#include <xxzb/errors.hpp>
#include <xxzb/mps.hpp>
#include <xxzb/trajectory.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace xxzb {

struct AnalysisWindow {
    double tau1 = 0.0;
    double tau2 = 0.0;  // start of the averaging interval
    double T = 0.0;     // end of the averaging interval

    bool operator==(const AnalysisWindow&) const = default;

    void validate() const {
        if (!(tau1 > 0.0 && tau1 < tau2 && tau2 <= T))
            throw ArgumentError("analysis window needs 0 < tau1 < tau2 <= T");
    }

    // [0.35, 0.5] N/J averaging, as used for the size-scaling fits.
    static AnalysisWindow averaged(int N, double J = 1.0) { return {0.1 * N / J, 0.35 * N / J, 0.5 * N / J}; }
    // Point readout at 0.5 N/J.
    static AnalysisWindow readout(int N, double J = 1.0) { return {0.1 * N / J, 0.5 * N / J, 0.5 * N / J}; }
};

namespace detail {

inline void check_uniform_from_zero(std::span<const double> t) {
    if (t.empty()) throw ArgumentError("time series is empty");
    if (std::abs(t[0]) > 1e-12) throw ArgumentError("time series must start at t = 0");
    if (t.size() < 2) return;
    const double h = t[1] - t[0];
    for (std::size_t i = 1; i < t.size(); ++i)
        if (std::abs((t[i] - t[i - 1]) - h) > 1e-9 * std::max(1.0, h))
            throw ArgumentError("time series must be uniformly sampled");
}

// Value of the piecewise-linear interpolant at x (x within [t.front(), t.back()]).
inline double interpolate(std::span<const double> t, std::span<const double> v, double x) {
    auto it = std::upper_bound(t.begin(), t.end(), x);
    if (it == t.begin()) return v.front();
    if (it == t.end()) return v.back();
    const std::size_t j = static_cast<std::size_t>(it - t.begin());
    const double w = (x - t[j - 1]) / (t[j] - t[j - 1]);
    return (1.0 - w) * v[j - 1] + w * v[j];
}

// Integral of the piecewise-linear interpolant over [a, b]; reduces to the
// trapezoidal rule when a and b are grid points.
inline double integrate(std::span<const double> t, std::span<const double> v, double a, double b) {
    double s = 0.0;
    double x0 = a, y0 = interpolate(t, v, a);
    for (std::size_t j = 0; j < t.size(); ++j) {
        if (t[j] <= a) continue;
        if (t[j] >= b) break;
        s += 0.5 * (y0 + v[j]) * (t[j] - x0);
        x0 = t[j];
        y0 = v[j];
    }
    s += 0.5 * (y0 + interpolate(t, v, b)) * (b - x0);
    return s;
}

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double rms = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw ArgumentError("fit needs at least two distinct abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.rms = std::sqrt(ss / n);
    return f;
}

inline void check_fit_input(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ArgumentError("fit inputs have different lengths");
    if (x.size() < 3) throw ArgumentError("fits need at least 3 points, got " + std::to_string(x.size()));
    for (double v : y)
        if (!(v > 0.0)) throw DomainError("log-space fit needs positive values, got " + std::to_string(v));
}

} // namespace detail

// z(t) = 1 - (1/N_b) int_0^t Q(tau) dtau, cumulative trapezoid on the
// junction current.
inline std::vector<double> battery_magnetization(const TrajectoryRecord& rec, int N_b) {
    if (N_b < 1) throw ArgumentError("N_b must be positive");
    detail::check_uniform_from_zero(rec.times);
    std::vector<double> z(rec.size(), 1.0);
    double acc = 0.0;
    for (Index n = 1; n < rec.size(); ++n) {
        acc += 0.5 * (rec.junction_current[n - 1] + rec.junction_current[n]) * (rec.times[n] - rec.times[n - 1]);
        z[n] = 1.0 - acc / N_b;
    }
    return z;
}

// Mean <Z_i> over the left lead, straight from the profiles.
inline std::vector<double> summed_lead_magnetization(const TrajectoryRecord& rec, int N_b) {
    if (N_b < 1 || static_cast<Index>(N_b) > rec.length) throw ArgumentError("N_b out of range for the record");
    std::vector<double> z;
    for (const auto& row : rec.z_profile) {
        double s = 0.0;
        for (int i = 0; i < N_b; ++i) s += row[i];
        z.push_back(s / N_b);
    }
    return z;
}

inline double time_average(std::span<const double> t, std::span<const double> v, double a, double b) {
    if (t.size() != v.size() || t.empty()) throw ArgumentError("time series and values disagree");
    if (a < t.front() - 1e-12 || b > t.back() + 1e-9 || a > b)
        throw ArgumentError("averaging window [" + std::to_string(a) + ", " + std::to_string(b) +
                            "] is outside the record");
    if (b - a <= 1e-12) return detail::interpolate(t, v, a);
    return detail::integrate(t, v, a, b) / (b - a);
}

// Trapezoidal mean of the junction current over [tau2, T].
inline double quasi_steady_current(const TrajectoryRecord& rec, const AnalysisWindow& w) {
    w.validate();
    return time_average(rec.times, rec.junction_current, w.tau2, w.T);
}

enum class FitModel { PowerLaw, Exponential, TimeDecay };

inline std::string to_string(FitModel m) {
    switch (m) {
    case FitModel::PowerLaw: return "power_law";
    case FitModel::Exponential: return "exponential";
    case FitModel::TimeDecay: return "time_decay";
    }
    return "?";
}

struct FitResult {
    FitModel model = FitModel::PowerLaw;
    double amplitude = 0.0;  // A, B, or the time-decay prefactor
    double exponent = 0.0;   // alpha, beta or delta
    double residual = 0.0;   // RMS misfit of log values
    int n_points = 0;
    int n_excluded = 0;      // points dropped by the current floor
};

constexpr double kCurrentFloor = 1e-8;

struct FlooredSeries {
    std::vector<double> x;
    std::vector<double> y;
    int excluded = 0;
};

// Drops points with y below the floor (truncation noise on tiny currents).
inline FlooredSeries apply_current_floor(std::span<const double> x, std::span<const double> y,
                                         double floor = kCurrentFloor) {
    if (x.size() != y.size()) throw ArgumentError("series lengths differ");
    FlooredSeries s;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (y[i] >= floor) {
            s.x.push_back(x[i]);
            s.y.push_back(y[i]);
        } else {
            ++s.excluded;
        }
    }
    return s;
}

// Q = A N^-alpha
inline FitResult fit_power_law(std::span<const double> sizes, std::span<const double> currents) {
    detail::check_fit_input(sizes, currents);
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (!(sizes[i] > 0.0)) throw DomainError("power-law fit needs positive sizes");
        lx.push_back(std::log(sizes[i]));
        ly.push_back(std::log(currents[i]));
    }
    const auto f = detail::fit_line(lx, ly);
    return {FitModel::PowerLaw, std::exp(f.intercept), -f.slope, f.rms, static_cast<int>(sizes.size()), 0};
}

// Q = B exp(-beta N)
inline FitResult fit_exponential(std::span<const double> sizes, std::span<const double> currents) {
    detail::check_fit_input(sizes, currents);
    std::vector<double> ly;
    for (double q : currents) ly.push_back(std::log(q));
    const auto f = detail::fit_line(sizes, ly);
    return {FitModel::Exponential, std::exp(f.intercept), -f.slope, f.rms, static_cast<int>(sizes.size()), 0};
}

// Q(t) = C t^-delta on the record points with t in [t_start, t_end].
inline FitResult fit_time_decay(std::span<const double> times, std::span<const double> currents, double t_start,
                                double t_end) {
    if (times.size() != currents.size()) throw ArgumentError("series lengths differ");
    if (!(t_start > 0.0) || !(t_end > t_start)) throw ArgumentError("time-decay window needs 0 < t_start < t_end");
    std::vector<double> t, q;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (times[i] >= t_start - 1e-12 && times[i] <= t_end + 1e-12) {
            t.push_back(times[i]);
            q.push_back(currents[i]);
        }
    auto r = fit_power_law(t, q);
    r.model = FitModel::TimeDecay;
    return r;
}

inline FitResult fit_time_decay(const TrajectoryRecord& rec, double t_start, double t_end) {
    return fit_time_decay(rec.times, rec.junction_current, t_start, t_end);
}

enum class RegimeLabel { Ballistic, SuperDiffusive, Diffusive, SubDiffusive, Insulating };

inline std::string to_string(RegimeLabel r) {
    switch (r) {
    case RegimeLabel::Ballistic: return "ballistic";
    case RegimeLabel::SuperDiffusive: return "super_diffusive";
    case RegimeLabel::Diffusive: return "diffusive";
    case RegimeLabel::SubDiffusive: return "sub_diffusive";
    case RegimeLabel::Insulating: return "insulating";
    }
    return "?";
}

// Size-scaling label. Negative alpha (current growing with N) is reported
// as ballistic, the raw exponent stays in the fit.
inline RegimeLabel classify_regime(const FitResult& power, const FitResult& exponential, double alpha_tol = 0.1) {
    if (exponential.residual < power.residual && exponential.exponent > 0.0) return RegimeLabel::Insulating;
    const double a = power.exponent;
    if (std::abs(a) <= alpha_tol || a < 0.0) return RegimeLabel::Ballistic;
    if (std::abs(a - 1.0) <= alpha_tol) return RegimeLabel::Diffusive;
    if (a < 1.0) return RegimeLabel::SuperDiffusive;
    return RegimeLabel::SubDiffusive;
}

// Time-decay label: delta = 0 ballistic, < 1/2 super-diffusive, 1/2
// diffusive, > 1/2 sub-diffusive.
inline RegimeLabel classify_time_decay(const FitResult& decay, double tol = 0.1) {
    const double d = decay.exponent;
    if (std::abs(d) <= tol || d < 0.0) return RegimeLabel::Ballistic;
    if (std::abs(d - 0.5) <= tol) return RegimeLabel::Diffusive;
    if (d < 0.5) return RegimeLabel::SuperDiffusive;
    return RegimeLabel::SubDiffusive;
}

// Re tr(a^dagger b) / sqrt(tr(a^dagger a) tr(b^dagger b)), clamped to [0, 1].
inline double state_fidelity(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ArgumentError("density matrices differ in dimension");
    const double ab = std::real((a.adjoint() * b).trace());
    const double aa = a.squaredNorm(), bb = b.squaredNorm();
    if (!(aa > 0.0) || !(bb > 0.0)) throw DomainError("fidelity of a zero matrix");
    return std::clamp(ab / std::sqrt(aa * bb), 0.0, 1.0);
}

inline double state_fidelity(const ReducedDensityMatrix& a, const ReducedDensityMatrix& b) {
    if (a.site_count != b.site_count) throw ArgumentError("density matrices cover different site counts");
    return state_fidelity(a.matrix, b.matrix);
}

struct Revival {
    Index index = 0;
    double time = 0.0;
    double increment = 0.0;  // rise above the preceding trough
};

constexpr double kRevivalThreshold = 1e-6;

// A revival is a rise of more than eps above a trough that itself lies more
// than eps below the preceding peak.
inline std::vector<Revival> nonmonotonicity_witness(std::span<const double> values, std::span<const double> times = {},
                                                    double eps = kRevivalThreshold) {
    if (values.size() < 2) throw ArgumentError("witness needs at least 2 points");
    if (!times.empty() && times.size() != values.size()) throw ArgumentError("times and values differ in length");
    std::vector<Revival> out;
    bool falling = false;
    double peak = values[0], trough = values[0];
    for (std::size_t j = 1; j < values.size(); ++j) {
        const double f = values[j];
        if (!falling) {
            peak = std::max(peak, f);
            if (f < peak - eps) {
                falling = true;
                trough = f;
            }
        } else {
            trough = std::min(trough, f);
            if (f > trough + eps) {
                out.push_back({j, times.empty() ? static_cast<double>(j) : times[j], f - trough});
                falling = false;
                peak = f;
            }
        }
    }
    return out;
}

} // namespace xxzb
