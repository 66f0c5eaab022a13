#include "mlsolve/amplitude.hpp"

#include "mlsolve/errors.hpp"
#include "mlsolve/parallel.hpp"
#include "mlsolve/tracking.hpp"

#include "json.hpp"

#include <cmath>
#include <set>

namespace mlsolve {

namespace {

/// Neumaier summation.
class CompensatedSum {
public:
    void add(double v)
    {
        const double t = sum_ + v;
        if (std::fabs(sum_) >= std::fabs(v))
            carry_ += (sum_ - t) + v;
        else
            carry_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

Complex determinant(Matrix<Complex> a, bool& singular)
{
    std::vector<std::size_t> perm;
    int sign = 1;
    singular = !lu_factor(a, perm, &sign);
    if (singular)
        return {0.0, 0.0};
    Complex det(static_cast<double>(sign), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        det *= a(i, i);
    return det;
}

double matrix_norm(const Matrix<Complex>& a)
{
    double best = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j)
            row += std::abs(a(i, j));
        best = std::max(best, row);
    }
    return best;
}

/// Triangulations of the polygon on vertices i..j (i, j adjacent through the
/// outside); each diagonal (a, b) is recorded as the leaf range [a, b).
void triangulations(int i, int j, std::vector<std::vector<std::pair<int, int>>>& out)
{
    if (j - i < 2) {
        out.push_back({});
        return;
    }
    for (int k = i + 1; k < j; ++k) {
        std::vector<std::vector<std::pair<int, int>>> left, right;
        triangulations(i, k, left);
        triangulations(k, j, right);
        for (const auto& l : left)
            for (const auto& r : right) {
                auto t = l;
                t.insert(t.end(), r.begin(), r.end());
                if (k - i >= 2)
                    t.emplace_back(i, k);
                if (j - k >= 2)
                    t.emplace_back(k, j);
                out.push_back(std::move(t));
            }
    }
}

Rational planar_invariant(const MandelstamK2& s, int first, int last)
{
    Rational acc = 0;
    for (int a = first; a < last; ++a)
        for (int b = a + 1; b < last; ++b)
            acc += s(a, b);
    return acc;
}

Rational inverse_product(const std::vector<Rational>& factors)
{
    Rational prod = 1;
    for (const auto& f : factors) {
        if (f == 0)
            throw DataError("oracle amplitude has a pole at this data");
        prod *= f;
    }
    return 1 / prod;
}

Complex as_complex(const Rational& q) { return {to_double(q), 0.0}; }

} // namespace

HypothesisReport hypothesis_report(const ModelSpec& chart_model, const std::vector<Rational>& data)
{
    if (!chart_model.chart)
        throw ModelError(chart_model.name + " has no positive chart");
    const auto& c = *chart_model.chart;
    HypothesisReport h;
    h.factors = c.factor_text;
    auto combine = [&](const std::vector<long>& row) {
        Rational acc = 0;
        for (std::size_t k = 0; k < row.size() && k < data.size(); ++k)
            acc += Rational(row[k]) * data[k];
        return acc;
    };
    h.u_nonnegative = true;
    for (const auto& row : c.u_map) {
        h.u.push_back(combine(row));
        h.u_nonnegative = h.u_nonnegative && h.u.back() >= 0;
    }
    h.v_positive = true;
    for (const auto& row : c.v_map) {
        h.v.push_back(combine(row));
        h.v_positive = h.v_positive && h.v.back() > 0;
    }
    return h;
}

std::vector<std::vector<Complex>> chart_points(const ModelSpec& chart_model, const SolutionSet& base_set)
{
    if (!chart_model.chart)
        throw ModelError(chart_model.name + " has no positive chart");
    std::vector<std::vector<Complex>> out;
    out.reserve(base_set.points.size());
    for (const auto& p : base_set.points)
        out.push_back(chart_model.chart->base ? to_chart_coordinates(*chart_model.chart, p.x) : p.x);
    return out;
}

AmplitudeResult amplitude(const ModelSpec& chart_model, const std::vector<Rational>& data,
                          const std::vector<std::vector<Complex>>& chart_points, int workers)
{
    if (!chart_model.chart)
        throw ModelError(chart_model.name + " has no positive chart");
    if (data.size() != chart_model.num_states())
        throw DataError("amplitude: expected " + std::to_string(chart_model.num_states()) + " data values, got " +
                        std::to_string(data.size()));
    const auto sys = gradient(build_potential(chart_model));
    std::vector<Complex> s(data.size());
    for (std::size_t k = 0; k < s.size(); ++k)
        s[k] = as_complex(data[k]);

    AmplitudeResult res;
    res.dimension = static_cast<int>(chart_model.num_unknowns);
    res.sign = res.dimension % 2 == 0 ? 1 : -1;
    res.points = chart_points.size();
    res.hypotheses = hypothesis_report(chart_model, data);
    res.terms.resize(chart_points.size());

    parallel_for(chart_points.size(), workers, [&](std::size_t i) {
        AmplitudeTerm& t = res.terms[i];
        t.y = chart_points[i];
        try {
            if (t.y.size() != sys.dim())
                throw DataError("critical point has the wrong dimension");
            std::vector<Complex> polished = t.y;
            double r = refine(sys, polished, s, 1e-14, 3);
            if (scaled_distance(polished, t.y) < 1e-6 && r <= scaled_residual<Complex>(sys, t.y, s))
                t.y = std::move(polished);
            t.residual = scaled_residual<Complex>(sys, t.y, s);
            for (const auto& v : t.y)
                if (v == Complex(0.0, 0.0))
                    throw ModelError("critical point has a zero chart coordinate");
            auto h = toric_hessian(sys, t.y, s);
            bool singular = false;
            t.determinant = determinant(h, singular);
            Matrix<Complex> hinv;
            if (singular || !invert(h, hinv))
                throw SolveError("singular toric Hessian");
            t.condition = matrix_norm(h) * matrix_norm(hinv);
        } catch (const Error& e) {
            t.error = e.what();
        }
    });

    CompensatedSum re, im;
    for (const auto& t : res.terms) {
        if (!t.error.empty()) {
            res.reliable = false;
            continue;
        }
        const Complex inv = 1.0 / t.determinant;
        re.add(inv.real());
        im.add(inv.imag());
    }
    res.sum = static_cast<double>(res.sign) * Complex(re.value(), im.value());
    res.value = res.sum.real();
    res.imaginary_ratio = std::abs(res.sum) > 0.0 ? std::fabs(res.sum.imag()) / std::abs(res.sum) : 0.0;
    if (auto kind = oracle_for(chart_model)) {
        try {
            res.oracle = oracle_amplitude(*kind, data);
        } catch (const DataError&) {
        }
    }
    return res;
}

AmplitudeResult amplitude(const ModelSpec& chart_model, const std::vector<Rational>& data,
                          const InferenceOptions& options)
{
    if (!chart_model.chart)
        throw ModelError(chart_model.name + " has no positive chart");
    const ModelSpec& solve_on = chart_model.chart->base ? *chart_model.chart->base : chart_model;
    auto report = solve_model(solve_on, gradient(build_potential(solve_on)), data, options);
    auto res = amplitude(chart_model, data, chart_points(chart_model, report.set), options.workers);
    res.report = std::move(report);
    return res;
}

std::string oracle_name(OracleKind k)
{
    switch (k) {
    case OracleKind::triangle:
        return "triangle";
    case OracleKind::square:
        return "square";
    case OracleKind::associahedron_m6:
        return "associahedron_m6";
    }
    return "?";
}

OracleKind parse_oracle(const std::string& name)
{
    for (auto k : {OracleKind::triangle, OracleKind::square, OracleKind::associahedron_m6})
        if (oracle_name(k) == name)
            return k;
    throw DataError("unknown oracle '" + name + "' (triangle, square, associahedron_m6)");
}

Rational associahedron_m6(const MandelstamK2& s)
{
    if (s.m() != 6)
        throw DataError("associahedron_m6 needs a 6-point Mandelstam array");
    std::vector<std::vector<std::pair<int, int>>> trees;
    triangulations(1, 6, trees);
    Rational acc = 0;
    for (const auto& t : trees) {
        std::vector<Rational> poles;
        for (const auto& [a, b] : t)
            poles.push_back(planar_invariant(s, a, b));
        acc += inverse_product(poles);
    }
    return acc;
}

Rational oracle_amplitude(OracleKind kind, const std::vector<Rational>& s)
{
    switch (kind) {
    case OracleKind::triangle:
        if (s.size() != 3)
            throw DataError("triangle oracle takes 3 values");
        return inverse_product({s[0], s[1]}) + inverse_product({s[0], s[2]}) + inverse_product({s[1], s[2]});
    case OracleKind::square: {
        if (s.size() != 4)
            throw DataError("square oracle takes 4 values (s00, s01, s10, s11)");
        Rational n = s[0] + s[1] + s[2] + s[3];
        return n * n * inverse_product({s[0] + s[1], s[2] + s[3], s[0] + s[2], s[1] + s[3]});
    }
    case OracleKind::associahedron_m6:
        if (s.size() != 9)
            throw DataError("associahedron_m6 oracle takes the 9 CHY m=6 counts");
        return associahedron_m6(complete_k2(s, 6));
    }
    throw DataError("unknown oracle");
}

std::optional<OracleKind> oracle_for(const ModelSpec& chart_model)
{
    const auto& d = chart_model.descriptor;
    if (d.family == Family::simplex && d.n == 2)
        return OracleKind::triangle;
    if (d.family == Family::independence)
        return OracleKind::square;
    if (d.family == Family::chy && d.m == 6)
        return OracleKind::associahedron_m6;
    return std::nullopt;
}

std::string amplitude_to_json(const AmplitudeResult& result, const ModelSpec& chart_model, bool per_point)
{
    using Json = nlohmann::ordered_json;
    auto cx = [](const Complex& z) { return Json::array({to_decimal17(z.real()), to_decimal17(z.imag())}); };
    Json j;
    j["format"] = "mlsolve-amplitude";
    j["version"] = 1;
    j["tool"] = tool_version;
    j["model"] = chart_model.descriptor.canonical();
    j["model_digest"] = chart_model.digest();
    j["value"] = to_decimal17(result.value);
    j["sum"] = cx(result.sum);
    j["imaginary_ratio"] = to_decimal17(result.imaginary_ratio);
    j["points"] = result.points;
    j["dimension"] = result.dimension;
    j["sign_convention"] = "(-1)^d * sum 1/det(H_L)";
    j["sign"] = result.sign;
    j["reliable"] = result.reliable;
    if (result.oracle) {
        j["oracle"] = {{"exact", to_string(*result.oracle)}, {"value", to_decimal17(to_double(*result.oracle))}};
        const double o = to_double(*result.oracle);
        j["oracle"]["relative_error"] = to_decimal17(o != 0.0 ? std::fabs(result.value - o) / std::fabs(o) : 0.0);
    }
    Json hyp;
    Json u = Json::array(), v = Json::array();
    for (const auto& q : result.hypotheses.u)
        u.push_back(to_string(q));
    for (std::size_t k = 0; k < result.hypotheses.v.size(); ++k)
        v.push_back({{"factor", result.hypotheses.factors[k]}, {"v", to_string(result.hypotheses.v[k])}});
    hyp["u"] = u;
    hyp["v"] = v;
    hyp["u_nonnegative"] = result.hypotheses.u_nonnegative;
    hyp["v_positive"] = result.hypotheses.v_positive;
    j["hypotheses"] = hyp;
    if (result.report && result.report->summary) {
        const auto& s = *result.report->summary;
        j["solve"] = {{"distinct", s.distinct}, {"certified", s.certified}, {"real_certified", s.real_certified},
                      {"complete", result.report->set.complete}};
    }
    std::size_t failed = 0;
    for (const auto& t : result.terms)
        failed += t.error.empty() ? 0 : 1;
    j["failed_terms"] = failed;
    if (per_point) {
        Json terms = Json::array();
        for (const auto& t : result.terms) {
            Json tj;
            Json y = Json::array();
            for (const auto& z : t.y)
                y.push_back(cx(z));
            tj["y"] = y;
            tj["det"] = cx(t.determinant);
            tj["condition"] = to_decimal17(t.condition);
            tj["residual"] = to_decimal17(t.residual);
            if (!t.error.empty())
                tj["error"] = t.error;
            terms.push_back(tj);
        }
        j["terms"] = terms;
    }
    return j.dump(2) + "\n";
}

} // namespace mlsolve
