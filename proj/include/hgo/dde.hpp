#pragma once

// Fixed-step RK4 for retarded delay differential equations (method of steps).
// Delayed arguments are read from a history buffer by cubic Hermite
// interpolation between stored (state, derivative) nodes, or from the
// prehistory function for arguments at or before t0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hgo/error.hpp"

namespace hgo {

class HistoryBuffer {
public:
    using Prehistory = std::function<void(double s, std::span<double> out)>;

    HistoryBuffer(std::size_t dim, double t0, double h, Prehistory prehistory)
        : dim_(dim), t0_(t0), h_(h), prehistory_(std::move(prehistory)) {}

    std::size_t dim() const { return dim_; }
    double t0() const { return t0_; }
    double step() const { return h_; }
    std::size_t size() const { return states_.size() / std::max<std::size_t>(dim_, 1); }
    double time(std::size_t k) const { return t0_ + static_cast<double>(k) * h_; }
    double current_time() const { return size() == 0 ? t0_ : time(size() - 1); }

    std::span<const double> state(std::size_t k) const { return {states_.data() + k * dim_, dim_}; }
    std::span<const double> derivative(std::size_t k) const { return {derivs_.data() + k * dim_, dim_}; }

    void append(std::span<const double> state, std::span<const double> derivative) {
        states_.insert(states_.end(), state.begin(), state.end());
        derivs_.insert(derivs_.end(), derivative.begin(), derivative.end());
    }

    void prehistory(double s, std::span<double> out) const { prehistory_(s, out); }

    /// Dense value at t: prehistory for t <= t0, node value on grid points,
    /// cubic Hermite in between. Queries past the last node are errors.
    void sample(double t, std::span<double> out) const {
        if (t <= t0_ || size() == 0) {
            if (t > t0_) throw DdeError("history query at t=" + std::to_string(t) + " before integration started");
            prehistory_(t, out);
            return;
        }
        const double last = current_time();
        if (t > last) {
            if (t - last > 1e-9 * h_)
                throw DdeError("history query at t=" + std::to_string(t) + " beyond current time " +
                               std::to_string(last));
            t = last;
        }
        double pos = (t - t0_) / h_;
        // Grid times t0 + k h divide back to k only up to rounding.
        if (std::fabs(pos - std::nearbyint(pos)) <= 1e-9) pos = std::nearbyint(pos);
        auto k = static_cast<std::size_t>(std::floor(pos));
        if (k + 1 >= size()) k = size() - 1;
        const double theta = pos - static_cast<double>(k);
        if (theta == 0.0 || k + 1 >= size()) {
            auto s = state(k);
            std::copy(s.begin(), s.end(), out.begin());
            return;
        }
        const double t2 = theta * theta, t3 = t2 * theta;
        const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        const double h10 = t3 - 2.0 * t2 + theta;
        const double h01 = -2.0 * t3 + 3.0 * t2;
        const double h11 = t3 - t2;
        auto y0 = state(k), y1 = state(k + 1), d0 = derivative(k), d1 = derivative(k + 1);
        for (std::size_t i = 0; i < dim_; ++i)
            out[i] = h00 * y0[i] + h10 * h_ * d0[i] + h01 * y1[i] + h11 * h_ * d1[i];
    }

    std::vector<double> sample(double t) const {
        std::vector<double> v(dim_);
        sample(t, v);
        return v;
    }

private:
    std::size_t dim_;
    double t0_;
    double h_;
    Prehistory prehistory_;
    std::vector<double> states_;
    std::vector<double> derivs_;
};

/// Solution record on the uniform grid t0 + k h, with dense output.
class Trajectory {
public:
    explicit Trajectory(HistoryBuffer buffer) : buffer_(std::move(buffer)) {}

    const HistoryBuffer& history() const { return buffer_; }
    HistoryBuffer& history() { return buffer_; }

    std::size_t size() const { return buffer_.size(); }
    std::size_t dim() const { return buffer_.dim(); }
    double step() const { return buffer_.step(); }
    double time(std::size_t k) const { return buffer_.time(k); }
    std::span<const double> state(std::size_t k) const { return buffer_.state(k); }
    std::span<const double> derivative(std::size_t k) const { return buffer_.derivative(k); }

    std::vector<double> times() const {
        std::vector<double> t(size());
        for (std::size_t k = 0; k < t.size(); ++k) t[k] = time(k);
        return t;
    }

    std::vector<double> sample(double t) const { return buffer_.sample(t); }
    void sample(double t, std::span<double> out) const { buffer_.sample(t, out); }

    /// Set when integration stopped early (divergence or monitor abort).
    const std::optional<std::string>& failure() const { return failure_; }
    void set_failure(std::string msg) { failure_ = std::move(msg); }
    bool complete() const { return !failure_; }

private:
    HistoryBuffer buffer_;
    std::optional<std::string> failure_;
};

struct DdeProblem {
    std::size_t dim = 0;
    /// dy = f(t, y, history); the history may be sampled at any time <= t - min lag.
    std::function<void(double t, std::span<const double> y, const HistoryBuffer& past, std::span<double> dy)> rhs;
    HistoryBuffer::Prehistory prehistory;
    /// Lags in use at time t; each must be >= h.
    std::function<void(double t, std::vector<double>& lags)> lags;
    /// Optional check after every step; a returned message aborts integration.
    std::function<std::optional<std::string>(double t, std::span<const double> y)> monitor;
};

namespace detail {

inline void require_lags(const DdeProblem& p, double t, double h, std::vector<double>& scratch) {
    if (!p.lags) return;
    scratch.clear();
    p.lags(t, scratch);
    for (double lag : scratch) {
        if (lag < 0.0)
            throw DdeError("delayed argument in the future at t=" + std::to_string(t) + " (lag " +
                           std::to_string(lag) + ")");
        if (lag < h)
            throw DdeError("lag " + std::to_string(lag) + " smaller than step h=" + std::to_string(h) +
                           " at t=" + std::to_string(t));
    }
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace detail

/// Integrates on [t0, tf] with step h; tf - t0 must be a multiple of h.
inline Trajectory integrate(const DdeProblem& p, double t0, double tf, double h) {
    if (!(h > 0.0)) throw DdeError("step h must be positive");
    if (tf < t0) throw DdeError("t_span must satisfy tf >= t0");
    const double span = (tf - t0) / h;
    const auto steps = static_cast<std::size_t>(std::llround(span));
    if (std::fabs(span - static_cast<double>(steps)) > 1e-6) throw DdeError("t_span is not a multiple of h");

    const std::size_t n = p.dim;
    Trajectory traj(HistoryBuffer(n, t0, h, p.prehistory));
    HistoryBuffer& buf = traj.history();

    std::vector<double> y(n), k1(n), k2(n), k3(n), k4(n), tmp(n), lags;
    detail::require_lags(p, t0, h, lags);
    p.prehistory(t0, y);
    p.rhs(t0, y, buf, k1);
    buf.append(y, k1);

    for (std::size_t step = 0; step < steps; ++step) {
        const double t = buf.time(step);
        const double tm = t + 0.5 * h;
        const double tn = buf.time(step + 1);
        detail::require_lags(p, tm, h, lags);
        detail::require_lags(p, tn, h, lags);

        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        p.rhs(tm, tmp, buf, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        p.rhs(tm, tmp, buf, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
        p.rhs(tn, tmp, buf, k4);
        for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

        if (!detail::all_finite(y)) {
            traj.set_failure("non-finite state at t=" + std::to_string(tn));
            return traj;
        }
        p.rhs(tn, y, buf, k1);
        if (!detail::all_finite(k1)) {
            traj.set_failure("non-finite derivative at t=" + std::to_string(tn));
            return traj;
        }
        buf.append(y, k1);
        if (p.monitor) {
            if (auto msg = p.monitor(tn, y)) {
                traj.set_failure(*msg);
                return traj;
            }
        }
    }
    return traj;
}

} // namespace hgo
