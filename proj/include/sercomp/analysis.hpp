#pragma once

// Post-processing of simulated traces: dominant frequency, decay rate,
// band-limited energy comparison and the steady-state P-delta curve.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "sercomp/errors.hpp"
#include "sercomp/line_models.hpp"
#include "sercomp/power.hpp"
#include "sercomp/transforms.hpp"

namespace sercomp {

/// Time interval [t0, t1] measured from the first sample of a series.
struct TimeWindow {
    double t0 = 0.0;
    double t1 = 0.0;
};

struct SpectrumEstimate {
    double peak_frequency = 0.0;  // Hz
    double peak_amplitude = 0.0;  // channel units
    double resolution = 0.0;      // Hz, 1 / window length
};

namespace detail {

inline std::span<const double> slice(std::span<const double> series, double dt,
                                     std::optional<TimeWindow> window) {
    if (!(dt > 0.0)) throw InvalidArgument("analysis: dt must be > 0");
    if (!window) return series;
    if (!(window->t1 > window->t0) || window->t0 < 0.0)
        throw InvalidArgument("analysis: window must satisfy 0 <= t0 < t1");
    const auto first = static_cast<std::size_t>(std::llround(window->t0 / dt));
    auto last = static_cast<std::size_t>(std::llround(window->t1 / dt)) + 1;
    last = std::min(last, series.size());
    if (first >= last) return {};
    return series.subspan(first, last - first);
}

/// Removes the least-squares line.
inline std::vector<double> detrend(std::span<const double> x) {
    const std::size_t n = x.size();
    double mean_k = 0.5 * static_cast<double>(n - 1);
    double mean_x = 0.0;
    for (double v : x) mean_x += v;
    mean_x /= static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double dk = static_cast<double>(k) - mean_k;
        sxy += dk * (x[k] - mean_x);
        sxx += dk * dk;
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k)
        out[k] = x[k] - mean_x - slope * (static_cast<double>(k) - mean_k);
    return out;
}

inline std::vector<double> hann(std::size_t n) {
    std::vector<double> w(n);
    const double denom = static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k)
        w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / denom);
    return w;
}

/// Smallest power of two >= 8 n.
inline std::size_t padded_size(std::size_t n) {
    std::size_t m = 1;
    while (m < 8 * n) m <<= 1;
    return m;
}

struct Spectrum {
    std::vector<std::complex<double>> bins;
    std::size_t nfft = 0;
    double window_sum = 0.0;
};

/// Detrended, Hann-windowed, zero-padded transform.
inline Spectrum windowed_spectrum(std::span<const double> x) {
    std::vector<double> y = detrend(x);
    const std::vector<double> w = hann(y.size());
    Spectrum s;
    for (std::size_t k = 0; k < y.size(); ++k) {
        y[k] *= w[k];
        s.window_sum += w[k];
    }
    s.nfft = padded_size(y.size());
    y.resize(s.nfft, 0.0);
    Eigen::FFT<double> fft;
    fft.fwd(s.bins, y);
    return s;
}

inline void require_finite(std::span<const double> x, const char* who) {
    for (double v : x)
        if (!std::isfinite(v)) throw InvalidArgument(std::string(who) + ": non-finite sample");
}

inline double peak_abs(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace detail

/// Peak of the magnitude spectrum, DC bin excluded, refined by parabolic
/// interpolation between neighbouring bins.
inline SpectrumEstimate dominant_frequency(std::span<const double> series, double dt,
                                           std::optional<TimeWindow> window = std::nullopt) {
    const auto x = detail::slice(series, dt, window);
    if (x.size() < 64) throw InvalidArgument("dominant_frequency: window holds fewer than 64 samples");
    detail::require_finite(x, "dominant_frequency");
    const double scale = detail::peak_abs(x);
    const std::vector<double> residual = detail::detrend(x);
    if (scale == 0.0 || detail::peak_abs(residual) <= 1e-12 * scale)
        throw NoSignalError("dominant_frequency: series carries no oscillation");

    const auto spec = detail::windowed_spectrum(x);
    const std::size_t half = spec.nfft / 2;
    std::vector<double> mag(half + 1);
    for (std::size_t k = 0; k <= half; ++k) mag[k] = std::abs(spec.bins[k]);
    std::size_t best = 1;
    for (std::size_t k = 2; k < half; ++k)
        if (mag[k] > mag[best]) best = k;

    double offset = 0.0;
    double peak = mag[best];
    if (best + 1 <= half) {
        const double ym = mag[best - 1];
        const double y0 = mag[best];
        const double yp = mag[best + 1];
        const double curvature = ym - 2.0 * y0 + yp;
        if (curvature < 0.0) {
            offset = 0.5 * (ym - yp) / curvature;
            peak = y0 - 0.25 * (ym - yp) * offset;
        }
    }
    const double df = 1.0 / (static_cast<double>(spec.nfft) * dt);
    SpectrumEstimate est;
    est.peak_frequency = (static_cast<double>(best) + offset) * df;
    est.peak_amplitude = 2.0 * peak / spec.window_sum;
    est.resolution = 1.0 / (static_cast<double>(x.size()) * dt);
    return est;
}

/// Exponential decay rate of the dominant oscillation, from a least-squares
/// fit of log peak height over successive half-cycles.
///
/// The settled level is taken as the mean over the last full period of the
/// dominant frequency; half-cycles are delimited by crossings of that level.
inline double damping_estimate(std::span<const double> series, double dt,
                               std::optional<TimeWindow> window = std::nullopt) {
    const SpectrumEstimate est = dominant_frequency(series, dt, window);
    const auto x = detail::slice(series, dt, window);
    const auto period = static_cast<std::size_t>(std::llround(1.0 / (est.peak_frequency * dt)));
    const std::size_t tail = std::clamp<std::size_t>(period, 1, x.size());
    double level = 0.0;
    for (std::size_t k = x.size() - tail; k < x.size(); ++k) level += x[k];
    level /= static_cast<double>(tail);

    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] - level;

    std::vector<std::size_t> crossings;
    for (std::size_t k = 1; k < y.size(); ++k)
        if ((y[k - 1] < 0.0) != (y[k] < 0.0)) crossings.push_back(k);

    std::vector<double> times;
    std::vector<double> logs;
    double largest = 0.0;
    for (std::size_t c = 1; c < crossings.size(); ++c) {
        std::size_t best = crossings[c - 1];
        for (std::size_t k = crossings[c - 1]; k < crossings[c]; ++k)
            if (std::abs(y[k]) > std::abs(y[best])) best = k;
        double t = static_cast<double>(best);
        double h = std::abs(y[best]);
        if (best > 0 && best + 1 < y.size()) {
            const double ym = std::abs(y[best - 1]);
            const double yp = std::abs(y[best + 1]);
            const double curvature = ym - 2.0 * h + yp;
            if (curvature < 0.0) {
                const double off = 0.5 * (ym - yp) / curvature;
                t += off;
                h -= 0.25 * (ym - yp) * off;
            }
        }
        largest = std::max(largest, h);
        if (h <= 1e-9 * largest) break;  // numerical floor
        times.push_back(t * dt);
        logs.push_back(std::log(h));
    }
    if (times.size() < 4)
        throw InsufficientCyclesError("damping_estimate: fewer than 4 envelope peaks");

    const double n = static_cast<double>(times.size());
    double mt = 0.0;
    double ml = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        mt += times[k];
        ml += logs[k];
    }
    mt /= n;
    ml /= n;
    double stl = 0.0;
    double stt = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        stl += (times[k] - mt) * (logs[k] - ml);
        stt += (times[k] - mt) * (times[k] - mt);
    }
    return -stl / stt;
}

/// Spectral energy of `a` relative to `b` in [f_center - half_bw, f_center + half_bw].
inline double ssr_band_energy_ratio(std::span<const double> a, std::span<const double> b,
                                    double dt, double f_center, double half_bw) {
    if (a.size() != b.size()) throw InvalidArgument("ssr_band_energy_ratio: length mismatch");
    if (a.size() < 2) throw InvalidArgument("ssr_band_energy_ratio: series too short");
    if (!(dt > 0.0)) throw InvalidArgument("ssr_band_energy_ratio: dt must be > 0");
    if (!(f_center > 0.0)) throw InvalidArgument("ssr_band_energy_ratio: f_center must be > 0");
    const double resolution = 1.0 / (static_cast<double>(a.size()) * dt);
    if (!(half_bw > resolution))
        throw InvalidArgument("ssr_band_energy_ratio: half bandwidth must exceed the resolution");
    detail::require_finite(a, "ssr_band_energy_ratio");
    detail::require_finite(b, "ssr_band_energy_ratio");

    const auto band_energy = [&](std::span<const double> x) {
        const auto spec = detail::windowed_spectrum(x);
        const double df = 1.0 / (static_cast<double>(spec.nfft) * dt);
        double e = 0.0;
        for (std::size_t k = 0; k <= spec.nfft / 2; ++k) {
            const double f = static_cast<double>(k) * df;
            if (f >= f_center - half_bw && f <= f_center + half_bw) e += std::norm(spec.bins[k]);
        }
        return e;
    };
    const double eb = band_energy(b);
    if (!(eb > 0.0))
        throw DegenerateComparisonError("ssr_band_energy_ratio: reference series has no energy in band");
    return band_energy(a) / eb;
}

/// One point of the steady-state power-angle curve, delivered convention.
struct PDeltaRow {
    double delta_deg = 0.0;
    double p = 0.0;  // W
    double q = 0.0;  // var
};

/// Steady-state flow with |vs| = |vr| = v_mag (peak phase volts) and vs
/// leading vr by delta, evaluated on `steps` evenly spaced angles.
inline std::vector<PDeltaRow> p_delta_sweep(const LineParams& params, const CompensationSpec& comp,
                                            double v_mag, double delta_min_deg,
                                            double delta_max_deg, std::size_t steps) {
    if (!(delta_min_deg > -180.0 && delta_max_deg < 180.0 && delta_min_deg < delta_max_deg))
        throw InvalidArgument("p_delta_sweep: range must satisfy -180 < min < max < 180 degrees");
    if (steps < 2) throw InvalidArgument("p_delta_sweep: steps must be >= 2");
    if (!(v_mag > 0.0)) throw InvalidArgument("p_delta_sweep: bus magnitude must be > 0");
    std::vector<PDeltaRow> rows;
    rows.reserve(steps);
    const double span = delta_max_deg - delta_min_deg;
    for (std::size_t k = 0; k < steps; ++k) {
        const double deg = delta_min_deg + span * static_cast<double>(k) / static_cast<double>(steps - 1);
        const double rad = deg * std::numbers::pi / 180.0;
        const BusVoltages bus{balanced_phasor(v_mag, 0.0), balanced_phasor(v_mag, -rad), {}};
        const PQ d = steady_state_pq(bus, params, comp).delivered();
        rows.push_back({deg, d.p, d.q});
    }
    return rows;
}

inline PDeltaRow sweep_peak(const std::vector<PDeltaRow>& rows) {
    if (rows.empty()) throw InvalidArgument("sweep_peak: empty sweep");
    return *std::max_element(rows.begin(), rows.end(),
                             [](const PDeltaRow& x, const PDeltaRow& y) { return x.p < y.p; });
}

}  // namespace sercomp
