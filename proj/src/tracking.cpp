#include "mlsolve/tracking.hpp"

#include "mlsolve/errors.hpp"
#include "mlsolve/parallel.hpp"
#include "mlsolve/registry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mlsolve {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

template <class T>
bool all_finite(std::span<const T> v)
{
    for (const T& a : v) {
        if constexpr (std::is_same_v<T, double>) {
            if (!std::isfinite(a))
                return false;
        } else {
            if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
                return false;
        }
    }
    return true;
}

template <class T>
double parameter_scale(std::span<const T> s)
{
    return std::max(1.0, inf_norm<T>(s));
}

template <class T>
class Tracker {
public:
    Tracker(const RationalSystem& sys, const TrackerOptions& opt, std::span<const T> s0, std::span<const T> s1)
        : sys_(sys), opt_(opt), d_(sys.dim()), np_(sys.num_params())
    {
        s0_.assign(s0.begin(), s0.end());
        ds_.resize(np_);
        for (std::size_t k = 0; k < np_; ++k)
            ds_[k] = s1[k] - s0[k];
        st_.resize(np_);
        params_.resize(2 * np_);
        buf_.resize(d_ * d_ + d_);
        f_.resize(d_);
        for (auto* k : {&k1_, &k2_, &k3_, &k4_, &xt_, &xn_})
            k->resize(d_);
        jac_.resize(d_, d_);
    }

    PathOutcome run(std::span<const T> start)
    {
        PathOutcome out;
        std::vector<T> x(start.begin(), start.end());
        try {
            set_params(0.0);
            // The start point should already be a zero; tighten it a little.
            double r = residual(x);
            for (int it = 0; it < opt_.max_corrector_iterations && r > opt_.tolerance; ++it) {
                if (!newton_step(x))
                    break;
                r = residual(x);
            }
            if (!(r <= 10.0 * opt_.tolerance) && !(std::isfinite(r) && at_noise_level<T>(sys_, x, st_, opt_.tolerance))) {
                finish(out, x, 0.0, 0, PathStatus::corrector_failure, r);
                return out;
            }
            double t = 0.0, h = std::min(opt_.initial_step, 1.0);
            int streak = 0, steps = 0;
            bool identity = std::all_of(ds_.begin(), ds_.end(), [](const T& v) { return v == T(0.0); });
            if (identity)
                t = 1.0;
            while (t < 1.0) {
                if (steps >= opt_.max_steps) {
                    finish(out, x, t, steps, PathStatus::step_underflow, inf);
                    return out;
                }
                ++steps;
                const double step = std::min(h, 1.0 - t);
                const double t_next = (1.0 - t - step <= 4 * std::numeric_limits<double>::epsilon()) ? 1.0 : t + step;
                bool ok = predict(x, t, t_next - t) && correct(xn_, t_next);
                if (ok) {
                    x.swap(xn_);
                    t = t_next;
                    if (inf_norm<T>(x) > opt_.divergence_bound) {
                        finish(out, x, t, steps, PathStatus::diverged, inf);
                        return out;
                    }
                    if (++streak >= opt_.successes_before_growth) {
                        h *= opt_.growth;
                        streak = 0;
                    }
                } else {
                    streak = 0;
                    h *= opt_.shrink;
                    if (h < opt_.min_step) {
                        finish(out, x, t, steps, PathStatus::step_underflow, inf);
                        return out;
                    }
                }
            }
            set_params(1.0);
            double r_end = residual(x);
            for (int it = 0; it < 6 && r_end > opt_.tolerance; ++it) {
                if (!newton_step(x))
                    break;
                r_end = residual(x);
            }
            PathStatus st = r_end <= opt_.tolerance ? PathStatus::success : PathStatus::corrector_failure;
            if (st == PathStatus::corrector_failure && std::isfinite(r_end) &&
                at_noise_level<T>(sys_, x, st_, opt_.tolerance))
                st = PathStatus::success;
            if (inf_norm<T>(x) > opt_.divergence_bound)
                st = PathStatus::diverged;
            finish(out, x, 1.0, steps, st, r_end);
        } catch (const SingularEvaluation&) {
            finish(out, x, out.t, out.steps, PathStatus::singular_evaluation, inf);
        }
        return out;
    }

    /// Newton at the currently set parameters; false on singular or non-finite updates.
    bool newton_step(std::vector<T>& x)
    {
        evaluate_with_jacobian<T>(sys_, x, st_, f_, jac_, ws_);
        if (!lu_factor(jac_, perm_))
            return false;
        lu_solve(jac_, perm_, std::span<T>(f_), scratch_);
        if (!all_finite<T>(f_))
            return false;
        for (std::size_t i = 0; i < d_; ++i)
            x[i] -= f_[i];
        last_update_ = inf_norm<T>(f_);
        return true;
    }

    double residual(std::span<const T> x)
    {
        evaluate<T>(sys_, x, st_, std::span<T>(f_), ws_);
        if (!all_finite<T>(f_))
            return inf;
        return inf_norm<T>(f_) / parameter_scale<T>(st_);
    }

    void set_params(double t)
    {
        for (std::size_t k = 0; k < np_; ++k)
            st_[k] = s0_[k] + T(t) * ds_[k];
    }

private:
    bool velocity(std::span<const T> x, double t, std::vector<T>& v)
    {
        for (std::size_t k = 0; k < np_; ++k) {
            params_[k] = s0_[k] + T(t) * ds_[k];
            params_[np_ + k] = ds_[k];
        }
        sys_.predictor_tape().eval<T>(x, params_, std::span<T>(buf_), ws_.slots);
        auto jd = jac_.data();
        for (std::size_t k = 0; k < d_ * d_; ++k)
            jd[k] = buf_[k];
        if (!lu_factor(jac_, perm_))
            return false;
        for (std::size_t i = 0; i < d_; ++i)
            v[i] = -buf_[d_ * d_ + i];
        lu_solve(jac_, perm_, std::span<T>(v), scratch_);
        return all_finite<T>(v);
    }

    bool predict(std::span<const T> x, double t, double h)
    {
        auto axpy = [&](const std::vector<T>& k, double a) {
            for (std::size_t i = 0; i < d_; ++i)
                xt_[i] = x[i] + T(a) * k[i];
        };
        if (!velocity(x, t, k1_))
            return false;
        axpy(k1_, 0.5 * h);
        if (!velocity(xt_, t + 0.5 * h, k2_))
            return false;
        axpy(k2_, 0.5 * h);
        if (!velocity(xt_, t + 0.5 * h, k3_))
            return false;
        axpy(k3_, h);
        if (!velocity(xt_, t + h, k4_))
            return false;
        for (std::size_t i = 0; i < d_; ++i)
            xn_[i] = x[i] + T(h / 6.0) * (k1_[i] + T(2.0) * k2_[i] + T(2.0) * k3_[i] + k4_[i]);
        return all_finite<T>(xn_);
    }

    /// Newton at t with acceptance on a small first update and contraction.
    bool correct(std::vector<T>& x, double t)
    {
        set_params(t);
        double prev = inf;
        for (int it = 0; it < opt_.max_corrector_iterations; ++it) {
            if (!newton_step(x))
                return false;
            const double rel = last_update_ / (1.0 + inf_norm<T>(x));
            if (it == 0 && rel > opt_.max_predictor_error)
                return false;
            if (it > 0 && last_update_ > 0.5 * prev)
                return false;
            if (rel <= opt_.path_accuracy)
                return true;
            prev = last_update_;
        }
        return false;
    }

    void finish(PathOutcome& out, const std::vector<T>& x, double t, int steps, PathStatus st, double r)
    {
        out.end.assign(x.begin(), x.end());
        out.t = t;
        out.steps = steps;
        out.status = st;
        out.residual = r;
    }

    const RationalSystem& sys_;
    TrackerOptions opt_;
    std::size_t d_, np_;
    std::vector<T> s0_, ds_, st_, params_, buf_, f_, k1_, k2_, k3_, k4_, xt_, xn_, scratch_;
    Matrix<T> jac_;
    std::vector<std::size_t> perm_;
    EvalWorkspace<T> ws_;
    double last_update_ = 0.0;
};

} // namespace

void TrackerOptions::validate() const
{
    if (!(0.0 < min_step && min_step < initial_step && initial_step <= 1.0))
        throw SolveError("tracker options need 0 < min_step < initial_step <= 1");
    if (!(shrink > 0.0 && shrink < 1.0 && growth > 1.0))
        throw SolveError("tracker options need 0 < shrink < 1 < growth");
    if (tolerance <= 0.0 || max_corrector_iterations < 1 || max_steps < 1 || successes_before_growth < 1)
        throw SolveError("tracker options must be positive");
}

std::string path_status_name(PathStatus s)
{
    switch (s) {
    case PathStatus::success:
        return "success";
    case PathStatus::corrector_failure:
        return "corrector-failure";
    case PathStatus::diverged:
        return "diverged";
    case PathStatus::singular_evaluation:
        return "singular-evaluation";
    case PathStatus::step_underflow:
        return "step-underflow";
    }
    return "?";
}

template <class T>
double scaled_residual(const RationalSystem& sys, std::span<const T> x, std::span<const T> s)
{
    try {
        auto f = evaluate<T>(sys, x, s);
        if (!all_finite<T>(f))
            return inf;
        return inf_norm<T>(f) / parameter_scale<T>(s);
    } catch (const SingularEvaluation&) {
        return inf;
    }
}

template <class T>
double newton(const RationalSystem& sys, std::span<T> x, std::span<const T> s, int iterations)
{
    const std::size_t d = sys.dim();
    EvalWorkspace<T> ws;
    std::vector<T> f(d), scratch;
    Matrix<T> jac(d, d);
    std::vector<std::size_t> perm;
    double upd = inf;
    try {
        for (int it = 0; it < iterations; ++it) {
            evaluate_with_jacobian<T>(sys, x, s, f, jac, ws);
            if (!lu_factor(jac, perm))
                return inf;
            lu_solve(jac, perm, std::span<T>(f), scratch);
            if (!all_finite<T>(f))
                return inf;
            for (std::size_t i = 0; i < d; ++i)
                x[i] -= f[i];
            upd = inf_norm<T>(f);
        }
    } catch (const SingularEvaluation&) {
        return inf;
    }
    return upd;
}

template <class T>
bool at_noise_level(const RationalSystem& sys, std::span<const T> x, std::span<const T> s, double tolerance)
{
    using I = std::conditional_t<std::is_same_v<T, double>, Interval, ComplexInterval>;
    const double r = scaled_residual<T>(sys, x, s);
    if (!(r <= 1e-4))
        return false;
    if (r <= 1e3 * tolerance) {
        try {
            std::vector<I> xi(x.begin(), x.end()), si(s.begin(), s.end());
            auto fi = evaluate<I>(sys, xi, si);
            auto f = evaluate<T>(sys, x, s);
            double width = 0.0;
            for (const auto& v : fi) {
                if constexpr (std::is_same_v<T, double>)
                    width = std::max(width, v.hi - v.lo);
                else
                    width = std::max({width, v.re.hi - v.re.lo, v.im.hi - v.im.lo});
            }
            if (inf_norm<T>(f) <= width)
                return true;
        } catch (const SingularEvaluation&) {
            return false;
        }
    }
    // Input rounding (e.g. 1 - x_i for x_i near 1) leaves a residual that no
    // binary64 point improves; Newton has converged when its step is negligible.
    std::vector<T> y(x.begin(), x.end());
    return newton<T>(sys, y, s, 1) <= 1e-12 * (1.0 + inf_norm<T>(x));
}

template <class T>
bool accept_endpoint(const RationalSystem& sys, std::span<const T> x, std::span<const T> s, double tolerance)
{
    return scaled_residual<T>(sys, x, s) <= tolerance || at_noise_level<T>(sys, x, s, tolerance);
}

template bool at_noise_level<double>(const RationalSystem&, std::span<const double>, std::span<const double>, double);
template bool at_noise_level<Complex>(const RationalSystem&, std::span<const Complex>, std::span<const Complex>,
                                      double);
template bool accept_endpoint<double>(const RationalSystem&, std::span<const double>, std::span<const double>,
                                      double);
template bool accept_endpoint<Complex>(const RationalSystem&, std::span<const Complex>, std::span<const Complex>,
                                       double);
template double scaled_residual<double>(const RationalSystem&, std::span<const double>, std::span<const double>);
template double scaled_residual<Complex>(const RationalSystem&, std::span<const Complex>, std::span<const Complex>);
template double newton<double>(const RationalSystem&, std::span<double>, std::span<const double>, int);
template double newton<Complex>(const RationalSystem&, std::span<Complex>, std::span<const Complex>, int);

double refine(const RationalSystem& sys, std::span<Complex> x, std::span<const Complex> s, double tolerance,
              int max_iterations)
{
    double r = scaled_residual<Complex>(sys, x, s);
    for (int it = 0; it < max_iterations && r > tolerance; ++it) {
        std::vector<Complex> trial(x.begin(), x.end());
        if (!std::isfinite(newton<Complex>(sys, trial, s, 1)))
            break;
        double r2 = scaled_residual<Complex>(sys, trial, s);
        if (!(r2 < r) && r2 > tolerance)
            break;
        std::copy(trial.begin(), trial.end(), x.begin());
        r = r2;
    }
    return r;
}

PathOutcome track_path(const RationalSystem& sys, std::span<const Complex> start, std::span<const Complex> s_start,
                       std::span<const Complex> s_target, const TrackerOptions& options)
{
    options.validate();
    if (start.size() != sys.dim() || s_start.size() != sys.num_params() || s_target.size() != sys.num_params())
        throw SolveError("track_path: dimension mismatch");
    if (options.field == Field::complex) {
        Tracker<Complex> tr(sys, options, s_start, s_target);
        return tr.run(start);
    }
    if (!sys.linear_model())
        throw SolveError("real-field tracking is only permitted for linear models");
    auto re = [](std::span<const Complex> v) {
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i].imag() != 0.0)
                throw SolveError("real-field tracking needs real start points and parameters");
            r[i] = v[i].real();
        }
        return r;
    };
    auto s0 = re(s_start), s1 = re(s_target), x0 = re(start);
    Tracker<double> tr(sys, options, s0, s1);
    return tr.run(x0);
}

std::vector<PathOutcome> track_all(const RationalSystem& sys, const std::vector<std::vector<Complex>>& starts,
                                   std::span<const Complex> s_start, std::span<const Complex> s_target,
                                   const TrackerOptions& options, int workers)
{
    std::vector<PathOutcome> out(starts.size());
    parallel_for(starts.size(), workers,
                 [&](std::size_t i) { out[i] = track_path(sys, starts[i], s_start, s_target, options); });
    return out;
}

double condition_number(const RationalSystem& sys, std::span<const Complex> x, std::span<const Complex> s)
{
    Matrix<Complex> j;
    try {
        j = jacobian<Complex>(sys, x, s);
    } catch (const SingularEvaluation&) {
        return std::numeric_limits<double>::infinity();
    }
    // Columns scaled by max(1, |x_j|), then rows to unit ∞-norm: neither the
    // size of the point nor equation scaling counts as ill-conditioning.
    for (std::size_t k = 0; k < j.cols(); ++k) {
        const double c = std::max(1.0, std::abs(x[k]));
        for (std::size_t i = 0; i < j.rows(); ++i)
            j(i, k) *= c;
    }
    for (std::size_t i = 0; i < j.rows(); ++i) {
        double norm = 0.0;
        for (std::size_t k = 0; k < j.cols(); ++k)
            norm += std::abs(j(i, k));
        if (!(norm > 0.0) || !std::isfinite(norm))
            return std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < j.cols(); ++k)
            j(i, k) /= norm;
    }
    Matrix<Complex> inv;
    if (!invert(j, inv))
        return std::numeric_limits<double>::infinity();
    auto row_norm = [](const Matrix<Complex>& m) {
        double best = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < m.cols(); ++k)
                acc += std::abs(m(i, k));
            best = std::max(best, acc);
        }
        return best;
    };
    double c = row_norm(j) * row_norm(inv);
    return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
}

double scaled_distance(std::span<const Complex> a, std::span<const Complex> b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(a[i])));
    return m;
}

SolutionSet parameter_homotopy(const RationalSystem& sys, const std::vector<std::vector<Complex>>& starts,
                               std::span<const Complex> s_start, std::span<const Complex> s_target,
                               const TrackerOptions& options, int workers)
{
    auto outcomes = track_all(sys, starts, s_start, s_target, options, workers);
    SolutionSet set;
    PointRegistry registry(sys.dim());
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        if (o.status != PathStatus::success) {
            set.failures.push_back({i, path_status_name(o.status), o.t, o.residual});
            continue;
        }
        if (!registry.insert(o.end)) {
            set.failures.push_back({i, "duplicate-endpoint", 1.0, o.residual});
            continue;
        }
        Solution sol;
        sol.x = o.end;
        sol.residual = o.residual;
        sol.origin = Provenance::tracked;
        sol.source = static_cast<long>(i);
        set.points.push_back(std::move(sol));
    }
    set.parameters.assign(s_target.begin(), s_target.end());
    set.expected = starts.size();
    set.complete = set.points.size() == starts.size();
    return set;
}

} // namespace mlsolve
