#include "mlsolve/certify.hpp"

#include "mlsolve/errors.hpp"
#include "mlsolve/linalg.hpp"
#include "mlsolve/parallel.hpp"
#include "mlsolve/tracking.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace mlsolve {

namespace {

std::string fnv_hex(const std::string& text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Interval to_interval(const Rational& q)
{
    auto [lo, hi] = enclose(q);
    return {lo, hi};
}

/// Core Krawczyk test over T ∈ {Interval, ComplexInterval} with P the matching
/// point type. Fills `image`; returns false when K(B) is not inside B.
/// `f_mid`, when given, encloses F(mid) and replaces its interval evaluation.
template <class T, class P>
bool krawczyk_step(const RationalSystem& sys, std::span<const T> s, std::span<const P> mid,
                   const std::vector<T>& box, std::vector<T>& image, std::string& reason,
                   const std::vector<T>* f_mid = nullptr)
{
    const std::size_t d = sys.dim();
    std::vector<P> s_mid(s.size());
    for (std::size_t k = 0; k < s.size(); ++k)
        s_mid[k] = s[k].mid();
    Matrix<P> y;
    try {
        Matrix<P> jm = jacobian<P>(sys, mid, s_mid);
        if (!invert(jm, y)) {
            reason = "singular midpoint Jacobian";
            return false;
        }
    } catch (const SingularEvaluation&) {
        reason = "singular evaluation at the midpoint";
        return false;
    }

    std::vector<T> mid_i(mid.begin(), mid.end());
    std::vector<T> f;
    Matrix<T> jb;
    try {
        f = f_mid ? *f_mid : evaluate<T>(sys, mid_i, s);
        jb = jacobian<T>(sys, box, s);
    } catch (const SingularEvaluation&) {
        reason = "a denominator vanishes on the box";
        return false;
    }

    image.assign(d, T(0.0));
    std::vector<T> delta(d);
    for (std::size_t i = 0; i < d; ++i)
        delta[i] = box[i] - mid_i[i];
    for (std::size_t i = 0; i < d; ++i) {
        T acc = mid_i[i];
        for (std::size_t k = 0; k < d; ++k)
            acc -= T(y(i, k)) * f[k];
        for (std::size_t j = 0; j < d; ++j) {
            // (I - Y J(B))_{ij}
            T m = T(i == j ? 1.0 : 0.0);
            for (std::size_t k = 0; k < d; ++k)
                m -= T(y(i, k)) * jb(k, j);
            acc += m * delta[j];
        }
        image[i] = acc;
    }
    for (std::size_t i = 0; i < d; ++i) {
        if (!box[i].interior_contains(image[i])) {
            reason = "Krawczyk image not inside the box";
            return false;
        }
    }
    reason.clear();
    return true;
}

std::vector<ComplexInterval> complex_box(std::span<const Complex> x, double inflation, bool relative = false)
{
    std::vector<ComplexInterval> b(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = inflation * (relative ? std::abs(x[i]) : std::max(1.0, std::abs(x[i])));
        b[i] = ComplexInterval(Interval(round_down(x[i].real() - r), round_up(x[i].real() + r)),
                               Interval(round_down(x[i].imag() - r), round_up(x[i].imag() + r)));
    }
    return b;
}

std::vector<ExactComplex> exact_residual(const RationalSystem& sys, const ParameterBox& s, std::span<const Complex> x)
{
    std::vector<ExactComplex> ex(x.begin(), x.end());
    return evaluate<ExactComplex>(sys, ex, s.exact);
}

std::vector<ComplexInterval> enclose_all(const std::vector<ExactComplex>& f)
{
    std::vector<ComplexInterval> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        out[i] = f[i].enclosure();
    return out;
}

/// Newton steps with the residual evaluated exactly, so the iterate settles to
/// the last few units in the last place.
void exact_refine(const RationalSystem& sys, const ParameterBox& s, std::vector<Complex>& x, int iterations = 4)
{
    std::vector<Complex> s_mid(s.values.size());
    for (std::size_t k = 0; k < s_mid.size(); ++k)
        s_mid[k] = s.values[k].mid();
    for (int it = 0; it < iterations; ++it) {
        std::vector<ExactComplex> f;
        Matrix<Complex> y;
        try {
            f = exact_residual(sys, s, x);
            if (!invert(jacobian<Complex>(sys, x, s_mid), y))
                return;
        } catch (const SingularEvaluation&) {
            return;
        }
        double step = 0.0;
        std::vector<Complex> dx(x.size(), Complex(0.0));
        for (std::size_t i = 0; i < x.size(); ++i)
            for (std::size_t k = 0; k < x.size(); ++k)
                dx[i] += y(i, k) * f[k].to_complex();
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] -= dx[i];
            step = std::max(step, std::abs(dx[i]) / std::max(1.0, std::abs(x[i])));
        }
        if (step < 1e-16)
            return;
    }
}

bool real_step(const RationalSystem& sys, const ParameterBox& s, const std::vector<Interval>& rbox, bool exact)
{
    const std::size_t d = rbox.size();
    std::vector<Interval> rs(s.values.size()), image;
    std::vector<double> mid(d);
    for (std::size_t i = 0; i < d; ++i)
        mid[i] = rbox[i].mid();
    for (std::size_t k = 0; k < rs.size(); ++k)
        rs[k] = s.values[k].re;
    std::string reason;
    if (!exact)
        return krawczyk_step<Interval, double>(sys, rs, mid, rbox, image, reason);
    std::vector<Interval> f(d);
    try {
        std::vector<Complex> cm(mid.begin(), mid.end());
        auto fe = exact_residual(sys, s, cm);
        for (std::size_t i = 0; i < d; ++i)
            f[i] = fe[i].enclosure().re;
    } catch (const SingularEvaluation&) {
        return false;
    }
    return krawczyk_step<Interval, double>(sys, rs, mid, rbox, image, reason, &f);
}

/// A real zero inside the real slice of a certified box is the box's unique
/// zero, so smaller real boxes inside the slice are valid witnesses too.
bool real_test(const RationalSystem& sys, const ParameterBox& s, const std::vector<ComplexInterval>& box,
               std::span<const Complex> mid)
{
    if (!s.real)
        return false;
    for (const auto& b : box)
        if (!b.im.contains_zero())
            return false;
    const std::size_t d = box.size();
    std::vector<Interval> rbox(d);
    for (std::size_t i = 0; i < d; ++i)
        rbox[i] = box[i].re;
    if (real_step(sys, s, rbox, false))
        return true;
    if (s.exact.empty())
        return false;
    std::vector<Complex> rmid(d);
    for (std::size_t i = 0; i < d; ++i)
        rmid[i] = Complex(mid[i].real(), 0.0);
    exact_refine(sys, s, rmid);
    for (double r = 1e-9; r >= 1e-15; r /= 10.0) {
        std::vector<Interval> small(d);
        bool inside = true;
        for (std::size_t i = 0; i < d; ++i) {
            const double x = rmid[i].real();
            const double w = r * std::max(1.0, std::abs(x));
            small[i] = Interval(round_down(x - w), round_up(x + w));
            inside = inside && box[i].re.lo <= small[i].lo && small[i].hi <= box[i].re.hi;
        }
        if (inside && real_step(sys, s, small, true))
            return true;
    }
    return false;
}

} // namespace

ParameterBox parameter_box(const std::vector<Rational>& exact)
{
    ParameterBox p;
    std::string text;
    for (const auto& q : exact) {
        p.values.emplace_back(to_interval(q));
        p.exact.emplace_back(q);
        text += to_string(q) + ";";
    }
    p.digest = fnv_hex("exact|" + text);
    p.real = true;
    return p;
}

ParameterBox parameter_box(std::span<const Complex> values)
{
    ParameterBox p;
    std::string text;
    p.real = true;
    for (const auto& v : values) {
        p.values.emplace_back(v);
        p.exact.emplace_back(v);
        text += to_decimal17(v.real()) + "," + to_decimal17(v.imag()) + ";";
        p.real = p.real && v.imag() == 0.0;
    }
    p.digest = fnv_hex("float|" + text);
    return p;
}

ParameterBox parameter_box(const SolutionSet& set)
{
    if (set.exact_parameters)
        return parameter_box(*set.exact_parameters);
    return parameter_box(std::span<const Complex>(set.parameters));
}

Certificate krawczyk_certify(const RationalSystem& sys, const ParameterBox& s, std::span<const Complex> x,
                             const KrawczykOptions& options)
{
    if (x.size() != sys.dim() || s.values.size() != sys.num_params())
        throw SolveError("krawczyk_certify: dimension mismatch");
    Certificate cert;
    cert.parameter_digest = s.digest;

    std::vector<Complex> mid(x.begin(), x.end());
    std::vector<Complex> s_mid(s.values.size());
    for (std::size_t k = 0; k < s_mid.size(); ++k)
        s_mid[k] = s.values[k].mid();
    refine(sys, mid, s_mid, 1e-15, 3);

    std::vector<double> schedule{options.inflation};
    for (int k = 1; k <= options.retries; ++k)
        schedule.push_back(options.inflation * std::pow(10.0, -k));
    for (int k = 1; k <= options.retries; ++k)
        schedule.push_back(options.inflation * std::pow(10.0, k));

    std::string reason = "not attempted";
    for (double inflation : schedule) {
        auto box = complex_box(mid, inflation);
        std::vector<ComplexInterval> image;
        if (krawczyk_step<ComplexInterval, Complex>(sys, s.values, mid, box, image, reason)) {
            cert.certified = true;
            cert.inflation = inflation;
            cert.box = std::move(box);
            cert.image = std::move(image);
            break;
        }
        // A singular midpoint does not improve with a different radius.
        if (reason.starts_with("singular"))
            break;
    }
    if (!cert.certified && !reason.starts_with("singular") && !s.exact.empty()) {
        std::vector<Complex> sharp = mid;
        exact_refine(sys, s, sharp);
        std::vector<ComplexInterval> f;
        if (scaled_distance(sharp, x) > 1e-6) {
            reason = "refinement left the neighbourhood of the point";
        } else {
            try {
                f = enclose_all(exact_residual(sys, s, sharp));
            } catch (const SingularEvaluation&) {
                reason = "singular evaluation at the midpoint";
            }
        }
        for (int k = 0; !f.empty() && !cert.certified && k < 12; ++k) {
            // Coordinates near zero need radii relative to their own size.
            double inflation = 1e-9 * std::pow(10.0, -(k % 6));
            auto box = complex_box(sharp, inflation, k >= 6);
            std::vector<ComplexInterval> image;
            if (krawczyk_step<ComplexInterval, Complex>(sys, s.values, sharp, box, image, reason, &f)) {
                cert.certified = true;
                cert.inflation = inflation;
                cert.box = std::move(box);
                cert.image = std::move(image);
                mid = sharp;
                break;
            }
        }
    }
    if (!cert.certified) {
        cert.reason = reason;
        return cert;
    }
    bool candidate = true;
    for (const auto& v : mid)
        candidate = candidate && std::abs(v.imag()) < options.real_candidate;
    if (candidate)
        cert.real_certified = real_test(sys, s, cert.box, mid);
    return cert;
}

bool recheck(const RationalSystem& sys, const ParameterBox& s, const Certificate& cert)
{
    if (!cert.certified || cert.box.size() != sys.dim() || cert.parameter_digest != s.digest)
        return false;
    std::vector<Complex> mid(cert.box.size());
    for (std::size_t i = 0; i < mid.size(); ++i)
        mid[i] = cert.box[i].mid();
    std::vector<ComplexInterval> image;
    std::string reason;
    if (krawczyk_step<ComplexInterval, Complex>(sys, s.values, mid, cert.box, image, reason))
        return true;
    if (s.exact.empty() || reason.starts_with("singular"))
        return false;
    try {
        auto f = enclose_all(exact_residual(sys, s, mid));
        return krawczyk_step<ComplexInterval, Complex>(sys, s.values, mid, cert.box, image, reason, &f);
    } catch (const SingularEvaluation&) {
        return false;
    }
}

CertifySummary certify_set(const RationalSystem& sys, const ParameterBox& s, std::vector<Solution>& points,
                           const KrawczykOptions& options, int workers)
{
    CertifySummary sum;
    sum.points = points.size();
    parallel_for(points.size(), workers,
                 [&](std::size_t i) { points[i].certificate = krawczyk_certify(sys, s, points[i].x, options); });

    // Union overlapping certified boxes; a sweep on the first real coordinate
    // keeps this near-linear.
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (points[i].certificate->certified)
            order.push_back(i);
    sum.certified = order.size();
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return points[a].certificate->box[0].re.lo < points[b].certificate->box[0].re.lo;
    });
    std::vector<std::size_t> parent(points.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](std::size_t i) {
        while (parent[i] != i)
            i = parent[i] = parent[parent[i]];
        return i;
    };
    auto overlap = [&](std::size_t a, std::size_t b) {
        const auto& ba = points[a].certificate->box;
        const auto& bb = points[b].certificate->box;
        for (std::size_t k = 0; k < ba.size(); ++k)
            if (!ba[k].overlaps(bb[k]))
                return false;
        return true;
    };
    for (std::size_t u = 0; u < order.size(); ++u) {
        const double hi = points[order[u]].certificate->box[0].re.hi;
        for (std::size_t v = u + 1; v < order.size(); ++v) {
            if (points[order[v]].certificate->box[0].re.lo > hi)
                break;
            if (overlap(order[u], order[v]))
                parent[root(order[v])] = root(order[u]);
        }
    }

    auto heuristic = [&](const Solution& p) {
        return std::all_of(p.x.begin(), p.x.end(), [&](const Complex& v) { return std::abs(v.imag()) < options.real_candidate; });
    };
    sum.cluster.assign(points.size(), -1);
    std::vector<long> cluster_of_root(points.size(), -1);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!points[i].certificate->certified) {
            if (heuristic(points[i]))
                ++sum.heuristic_real;
            continue;
        }
        std::size_t r = root(i);
        if (cluster_of_root[r] < 0) {
            cluster_of_root[r] = static_cast<long>(sum.distinct++);
            if (points[i].certificate->real_certified)
                ++sum.real_certified;
            if (heuristic(points[i]))
                ++sum.heuristic_real;
        }
        sum.cluster[i] = cluster_of_root[r];
    }
    return sum;
}

} // namespace mlsolve
