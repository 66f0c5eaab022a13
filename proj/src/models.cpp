#include "mlsolve/models.hpp"

#include "mlsolve/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

namespace mlsolve {

std::uint64_t binomial(int n, int k)
{
    if (k < 0 || k > n)
        return 0;
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i)
        r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return r;
}

std::uint64_t factorial(int n)
{
    std::uint64_t r = 1;
    for (int i = 2; i <= n; ++i)
        r *= static_cast<std::uint64_t>(i);
    return r;
}

std::string family_name(Family f)
{
    switch (f) {
    case Family::chy:
        return "chy";
    case Family::cegm3:
        return "cegm3";
    case Family::linear:
        return "linear";
    case Family::tensor:
        return "tensor";
    case Family::simplex:
        return "simplex";
    case Family::independence:
        return "independence";
    }
    return "?";
}

Family parse_family(const std::string& name)
{
    for (Family f : {Family::chy, Family::cegm3, Family::linear, Family::tensor, Family::simplex, Family::independence})
        if (family_name(f) == name)
            return f;
    if (name == "cegm")
        return Family::cegm3;
    throw ModelError("unknown model family '" + name + "'");
}

std::string ModelDescriptor::canonical() const
{
    std::ostringstream os;
    os << family_name(family) << ':';
    switch (family) {
    case Family::chy:
    case Family::cegm3:
        os << "m=" << m;
        break;
    case Family::linear:
        os << "n=" << n << ",d=" << d << ",seed=" << seed;
        break;
    case Family::tensor:
        os << "m=" << m << ",k=" << k << ",l=" << l;
        break;
    case Family::simplex:
        os << "n=" << n;
        break;
    case Family::independence:
        os << "2x2";
        break;
    }
    if (chart)
        os << "+chart";
    return os.str();
}

ModelDescriptor ModelDescriptor::parse(const std::string& text)
{
    ModelDescriptor d;
    std::string body = text;
    if (body.size() > 6 && body.substr(body.size() - 6) == "+chart") {
        d.chart = true;
        body = body.substr(0, body.size() - 6);
    }
    auto colon = body.find(':');
    if (colon == std::string::npos)
        throw FormatError("model descriptor without ':' in '" + text + "'");
    d.family = parse_family(body.substr(0, colon));
    std::stringstream ss(body.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos)
            continue;
        std::string key = item.substr(0, eq);
        std::string val = item.substr(eq + 1);
        if (key == "m")
            d.m = std::stoi(val);
        else if (key == "k")
            d.k = std::stoi(val);
        else if (key == "l")
            d.l = std::stoi(val);
        else if (key == "n")
            d.n = std::stoi(val);
        else if (key == "d")
            d.d = std::stoi(val);
        else if (key == "seed")
            d.seed = std::stoull(val);
        else
            throw FormatError("unknown descriptor key '" + key + "'");
    }
    return d;
}

std::vector<Complex> AffineMap::apply(std::span<const Complex> x) const
{
    const std::size_t n = offset.size();
    std::vector<Complex> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        Complex acc = offset[i];
        for (std::size_t j = 0; j < n; ++j)
            if (linear(i, j) != 0.0)
                acc += linear(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

namespace {

std::string index_label(const std::vector<int>& idx, bool compact)
{
    std::string s;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (!compact && i)
            s += ',';
        s += std::to_string(idx[i]);
    }
    return s;
}

std::string tuple_label(const std::vector<int>& t)
{
    bool compact = std::all_of(t.begin(), t.end(), [](int v) { return v <= 9; });
    return compact ? index_label(t, true) : "(" + index_label(t, false) + ")";
}

std::optional<std::vector<int>> parse_tuple(const std::string& text)
{
    std::string s;
    for (char c : text)
        if (c != '(' && c != ')' && c != ' ')
            s += c;
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty() || !std::all_of(item.begin(), item.end(), ::isdigit))
            return std::nullopt;
        out.push_back(std::stoi(item));
    }
    if (out.empty())
        return std::nullopt;
    return out;
}

std::uint64_t fnv(std::uint64_t h, const std::string& s)
{
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void check_sum_to_one(const ModelSpec& model)
{
    if (model.potential_only)
        return;
    double defect = sum_to_one_defect(model, 50, 0x5eed);
    if (defect > 1e-12)
        throw ModelError(model.name + ": probabilities do not sum to one (defect " + std::to_string(defect) + ")");
}

/// 3×3 determinant of expression columns by cofactor expansion.
ExprId det3(ExprGraph& g, const std::array<ExprId, 3>& a, const std::array<ExprId, 3>& b, const std::array<ExprId, 3>& c)
{
    auto m2 = [&](ExprId p, ExprId q, ExprId r, ExprId t) { return g.sub(g.mul(p, t), g.mul(q, r)); };
    return g.sum({g.mul(a[0], m2(b[1], c[1], b[2], c[2])), g.negate(g.mul(b[0], m2(a[1], c[1], a[2], c[2]))),
                  g.mul(c[0], m2(a[1], b[1], a[2], b[2]))});
}

// ---- sparse polynomials, only for analysing chart factors -----------------

using Monomial = std::vector<int>;

struct Poly {
    std::map<Monomial, Rational> terms;

    static Poly constant(std::size_t nvars, const Rational& c)
    {
        Poly p;
        if (c != 0)
            p.terms[Monomial(nvars, 0)] = c;
        return p;
    }
    static Poly variable(std::size_t nvars, std::size_t i)
    {
        Poly p;
        Monomial e(nvars, 0);
        e[i] = 1;
        p.terms[e] = 1;
        return p;
    }
    bool is_zero() const { return terms.empty(); }
};

Poly operator+(const Poly& a, const Poly& b)
{
    Poly r = a;
    for (const auto& [e, c] : b.terms) {
        Rational& slot = r.terms[e];
        slot += c;
        if (slot == 0)
            r.terms.erase(e);
    }
    return r;
}

Poly operator*(const Poly& a, const Poly& b)
{
    Poly r;
    for (const auto& [ea, ca] : a.terms)
        for (const auto& [eb, cb] : b.terms) {
            Monomial e(ea.size());
            for (std::size_t i = 0; i < e.size(); ++i)
                e[i] = ea[i] + eb[i];
            Rational& slot = r.terms[e];
            slot += ca * cb;
            if (slot == 0)
                r.terms.erase(e);
        }
    return r;
}

Poly scale(const Poly& a, const Rational& c)
{
    Poly r;
    if (c == 0)
        return r;
    for (const auto& [e, v] : a.terms)
        r.terms[e] = v * c;
    return r;
}

/// Numerator over a common denominator D^dexp.
struct Frac {
    Poly num;
    int dexp = 0;
};

struct FracContext {
    std::size_t nvars;
    Poly denom;
    std::vector<Poly> denom_powers{};

    const Poly& dpow(int k)
    {
        while (static_cast<int>(denom_powers.size()) <= k) {
            if (denom_powers.empty())
                denom_powers.push_back(Poly::constant(nvars, 1));
            else
                denom_powers.push_back(denom_powers.back() * denom);
        }
        return denom_powers[static_cast<std::size_t>(k)];
    }

    Frac lift(const Frac& f, int dexp) { return {f.num * dpow(dexp - f.dexp), dexp}; }
};

/// Evaluates a polynomial expression of the base model over chart fractions.
Frac to_frac(const ExprGraph& g, ExprId root, const std::vector<Frac>& vars, FracContext& ctx)
{
    std::map<std::uint32_t, Frac> memo;
    std::function<Frac(ExprId)> go = [&](ExprId e) -> Frac {
        if (auto it = memo.find(e.index); it != memo.end())
            return it->second;
        const auto& n = g.node(e);
        Frac r;
        switch (n.op) {
        case Op::constant:
            r = {Poly::constant(ctx.nvars, g.constant_value(e)), 0};
            break;
        case Op::variable:
            r = vars[n.ref];
            break;
        case Op::sum: {
            std::vector<Frac> parts;
            int top = 0;
            for (std::uint32_t c : g.children(e)) {
                parts.push_back(go(ExprId{c}));
                top = std::max(top, parts.back().dexp);
            }
            r = {Poly{}, top};
            for (const Frac& p : parts)
                r.num = r.num + ctx.lift(p, top).num;
            break;
        }
        case Op::product: {
            r = {Poly::constant(ctx.nvars, 1), 0};
            for (std::uint32_t c : g.children(e)) {
                Frac f = go(ExprId{c});
                r.num = r.num * f.num;
                r.dexp += f.dexp;
            }
            break;
        }
        case Op::power: {
            if (n.exponent < 0)
                throw ModelError("chart analysis needs polynomial probabilities");
            Frac b = go(ExprId{n.ref});
            r = {Poly::constant(ctx.nvars, 1), 0};
            for (int k = 0; k < n.exponent; ++k) {
                r.num = r.num * b.num;
                r.dexp += b.dexp;
            }
            break;
        }
        case Op::negate: {
            Frac b = go(ExprId{n.ref});
            r = {scale(b.num, -1), b.dexp};
            break;
        }
        default:
            throw ModelError("chart analysis needs polynomial probabilities");
        }
        memo.emplace(e.index, r);
        return r;
    };
    return go(root);
}

ExprId poly_expr(ExprGraph& g, const Poly& p)
{
    std::vector<ExprId> terms;
    for (const auto& [e, c] : p.terms) {
        std::vector<ExprId> f{g.constant(c)};
        for (std::size_t i = 0; i < e.size(); ++i)
            if (e[i] > 0)
                f.push_back(g.power(g.var(i), e[i]));
        terms.push_back(g.product(std::move(f)));
    }
    return g.sum(std::move(terms));
}

std::string poly_text(const Poly& p, const std::vector<std::string>& names)
{
    std::vector<std::pair<Monomial, Rational>> sorted(p.terms.begin(), p.terms.end());
    auto degree = [](const Monomial& e) { return std::accumulate(e.begin(), e.end(), 0); };
    std::sort(sorted.begin(), sorted.end(), [&](const auto& a, const auto& b) {
        if (degree(a.first) != degree(b.first))
            return degree(a.first) < degree(b.first);
        return a.first > b.first;
    });
    std::string s;
    for (const auto& [e, c] : sorted) {
        if (!s.empty())
            s += " + ";
        bool unit = c == 1;
        bool any = false;
        if (!unit)
            s += c.get_str();
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (e[i] == 0)
                continue;
            if (!unit || any)
                s += "*";
            s += names[i];
            if (e[i] > 1)
                s += "^" + std::to_string(e[i]);
            any = true;
        }
        if (unit && !any)
            s += "1";
    }
    return s;
}

} // namespace

std::optional<std::size_t> ModelSpec::state_index(const std::string& label) const
{
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label)
            return i;
    auto t = parse_tuple(label);
    if (!t)
        return std::nullopt;
    for (std::size_t i = 0; i < state_tuples.size(); ++i)
        if (state_tuples[i] == *t)
            return i;
    // "235" style spellings of index tuples
    if (t->size() == 1 && label.find(',') == std::string::npos) {
        std::vector<int> digits;
        for (char c : label)
            if (::isdigit(static_cast<unsigned char>(c)))
                digits.push_back(c - '0');
        for (std::size_t i = 0; i < state_tuples.size(); ++i)
            if (state_tuples[i] == digits)
                return i;
    }
    return std::nullopt;
}

std::string ModelSpec::digest() const
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv(h, "mlsolve-model-v1|" + descriptor.canonical());
    for (const auto& l : labels)
        h = fnv(h, "|" + l);
    for (ExprId p : probabilities)
        h = fnv(h, "|" + std::to_string(graph->hash(p)));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- families ---------------------------------------------------------------

ModelSpec chy_model(int m)
{
    if (m < 4)
        throw ModelError("CHY model needs m >= 4, got " + std::to_string(m));
    const int d = m - 3;
    std::vector<std::pair<int, int>> states;
    for (int i = 2; i <= m; ++i)
        for (int j = i + 1; j <= m; ++j)
            if (!(i == 2 && j == m))
                states.emplace_back(i, j);

    auto g = std::make_shared<ExprGraph>(d, states.size());
    // Columns of the 2×m matrix: (0,-1), (1,0), (1,x_1), ..., (1,x_{m-3}), (1,1).
    std::vector<std::pair<ExprId, ExprId>> col(m + 1);
    col[1] = {g->zero(), g->constant(-1)};
    col[2] = {g->one(), g->zero()};
    for (int c = 3; c <= m - 1; ++c)
        col[c] = {g->one(), g->var(c - 3)};
    col[m] = {g->one(), g->one()};

    const Rational mm(m - 3);
    ModelSpec model;
    model.name = "CHY m=" + std::to_string(m);
    model.descriptor = {Family::chy, m};
    model.num_unknowns = d;
    for (int i = 1; i <= d; ++i)
        model.unknown_names.push_back("x" + std::to_string(i));
    for (auto [i, j] : states) {
        Rational alpha;
        if (j == m)
            alpha = 1 / mm;
        else if (i == 2)
            alpha = Rational(2 * m - 2 * j - 1) / (mm * mm);
        else
            alpha = 1 / (mm * mm);
        ExprId q = g->sub(g->mul(col[i].first, col[j].second), g->mul(col[j].first, col[i].second));
        model.probabilities.push_back(g->mul(g->constant(alpha), q));
        model.labels.push_back(index_label({i, j}, m <= 9));
        model.state_tuples.push_back({i, j});
    }
    model.domain.kind = DomainKind::ordered_cube;
    model.domain.inequalities.push_back(g->var(0));
    for (int i = 1; i < d; ++i)
        model.domain.inequalities.push_back(g->sub(g->var(i), g->var(i - 1)));
    model.domain.inequalities.push_back(g->sub(g->one(), g->var(d - 1)));
    model.domain.ordering_regions = factorial(d);
    model.linear = true;
    model.known_solution_count = factorial(d);
    model.graph = g;
    check_sum_to_one(model);
    return model;
}

ModelSpec cegm3_model(int m)
{
    if (m < 5)
        throw ModelError("CEGM model needs m >= 5, got " + std::to_string(m));
    const int r = m - 4;
    auto excluded = [m](int i, int j, int k) {
        (void)m;
        return (i == 1 && j == 2) || (i == 1 && j == 3 && k == 4) || (i == 2 && j == 3 && k == 4);
    };
    std::vector<std::array<int, 3>> states;
    // colex order: by k, then j, then i
    for (int k = 3; k <= m; ++k)
        for (int j = 2; j < k; ++j)
            for (int i = 1; i < j; ++i)
                if (!excluded(i, j, k))
                    states.push_back({i, j, k});

    auto g = std::make_shared<ExprGraph>(2 * r, states.size());
    std::vector<std::array<ExprId, 3>> col(m + 1);
    col[1] = {g->zero(), g->zero(), g->one()};
    col[2] = {g->zero(), g->constant(-1), g->zero()};
    col[3] = {g->one(), g->zero(), g->zero()};
    col[4] = {g->one(), g->one(), g->one()};
    for (int l = 1; l <= r; ++l)
        col[4 + l] = {g->one(), g->var(l - 1), g->var(r + l - 1)};

    ModelSpec model;
    model.name = "CEGM k=3 m=" + std::to_string(m);
    model.descriptor = {Family::cegm3, m};
    model.num_unknowns = 2 * r;
    for (int l = 1; l <= r; ++l)
        model.unknown_names.push_back("x" + std::to_string(l));
    for (int l = 1; l <= r; ++l)
        model.unknown_names.push_back("y" + std::to_string(l));
    for (const auto& s : states) {
        ExprId minor = det3(*g, col[s[0]], col[s[1]], col[s[2]]);
        model.probabilities.push_back(minor);
        model.labels.push_back(index_label({s[0], s[1], s[2]}, m <= 9));
        model.state_tuples.push_back({s[0], s[1], s[2]});
    }
    // The excluded minors are identically one in this normalization.
    for (int k = 3; k <= m; ++k)
        if (det3(*g, col[1], col[2], col[k]) != g->one())
            throw ModelError("CEGM normalization broken for minor 12" + std::to_string(k));
    if (det3(*g, col[1], col[3], col[4]) != g->one() || det3(*g, col[2], col[3], col[4]) != g->one())
        throw ModelError("CEGM normalization broken for minors 134/234");

    model.domain.kind = DomainKind::positive_minors;
    model.domain.inequalities = model.probabilities;
    model.potential_only = true;
    switch (m) {
    case 5:
        model.known_solution_count = 2;
        break;
    case 6:
        model.known_solution_count = 26;
        break;
    case 7:
        model.known_solution_count = 1272;
        break;
    case 8:
        model.known_solution_count = 188112;
        break;
    default:
        break;
    }
    model.graph = g;
    return model;
}

ModelSpec random_linear_model(int n, int d, std::uint64_t seed)
{
    if (d < 1 || d > n)
        throw ModelError("random linear model needs 1 <= d <= n");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<Rational> c(n + 1);
    Rational total = 0;
    for (auto& ci : c) {
        ci = from_double(0.05 + unif(rng));
        total += ci;
    }
    for (auto& ci : c)
        ci /= total;

    auto g = std::make_shared<ExprGraph>(d, n + 1);
    ModelSpec model;
    model.name = "random linear n=" + std::to_string(n) + " d=" + std::to_string(d);
    model.descriptor = {Family::linear};
    model.descriptor.n = n;
    model.descriptor.d = d;
    model.descriptor.seed = seed;
    model.num_unknowns = d;
    for (int j = 1; j <= d; ++j)
        model.unknown_names.push_back("x" + std::to_string(j));
    std::vector<ExprId> ps;
    for (int i = 0; i < n; ++i) {
        std::vector<ExprId> terms{g->constant(c[i])};
        for (int j = 0; j < d; ++j)
            terms.push_back(g->mul(g->constant(from_double(normal(rng))), g->var(j)));
        ps.push_back(g->sum(std::move(terms)));
    }
    std::vector<ExprId> rest{g->one()};
    for (ExprId p : ps)
        rest.push_back(g->negate(p));
    ps.push_back(g->sum(std::move(rest)));
    for (int i = 0; i <= n; ++i) {
        model.labels.push_back(std::to_string(i));
        model.state_tuples.push_back({i});
    }
    model.probabilities = ps;
    model.domain.kind = DomainKind::polytope;
    model.domain.inequalities = ps;
    model.linear = true;
    model.known_solution_count = binomial(n, d);
    model.graph = g;
    check_sum_to_one(model);
    return model;
}

ModelSpec tensor_model(int m, int k, int l)
{
    if (m < 2 || k < 1 || l < 2)
        throw ModelError("tensor model needs m >= 2, k >= 1, l >= 2");
    // Ω_{m,l} in descending lexicographic order (300, 210, 201, ...).
    std::vector<std::vector<int>> omega;
    std::vector<int> cur(m, 0);
    std::function<void(int, int)> rec = [&](int pos, int left) {
        if (pos == m - 1) {
            cur[pos] = left;
            omega.push_back(cur);
            return;
        }
        for (int v = left; v >= 0; --v) {
            cur[pos] = v;
            rec(pos + 1, left - v);
        }
    };
    rec(0, l);

    const int d = k * m - 1;
    auto g = std::make_shared<ExprGraph>(d, omega.size());
    auto xi = [&](int j, int i) { return static_cast<std::size_t>(j * (m - 1) + i); };
    const std::size_t y0 = static_cast<std::size_t>(k * (m - 1));

    // Full rows with the substitutions x_{j,m} = 1 - Σ x_{j,i}, y_k = 1 - Σ y_j.
    std::vector<std::vector<ExprId>> x(k, std::vector<ExprId>(m));
    std::vector<ExprId> y(k);
    for (int j = 0; j < k; ++j) {
        std::vector<ExprId> rest{g->one()};
        for (int i = 0; i < m - 1; ++i) {
            x[j][i] = g->var(xi(j, i));
            rest.push_back(g->negate(x[j][i]));
        }
        x[j][m - 1] = g->sum(std::move(rest));
    }
    {
        std::vector<ExprId> rest{g->one()};
        for (int j = 0; j < k - 1; ++j) {
            y[j] = g->var(y0 + j);
            rest.push_back(g->negate(y[j]));
        }
        y[k - 1] = g->sum(std::move(rest));
    }

    ModelSpec model;
    model.name = "tensor m=" + std::to_string(m) + " k=" + std::to_string(k) + " l=" + std::to_string(l);
    model.descriptor = {Family::tensor, m, k, l};
    model.num_unknowns = d;
    for (int j = 1; j <= k; ++j)
        for (int i = 1; i < m; ++i)
            model.unknown_names.push_back("x" + std::to_string(j) + "_" + std::to_string(i));
    for (int j = 1; j < k; ++j)
        model.unknown_names.push_back("y" + std::to_string(j));

    for (const auto& I : omega) {
        std::uint64_t coeff = factorial(l);
        for (int v : I)
            coeff /= factorial(v);
        std::vector<ExprId> comps;
        for (int j = 0; j < k; ++j) {
            std::vector<ExprId> f{y[j]};
            for (int i = 0; i < m; ++i)
                if (I[i] > 0)
                    f.push_back(g->power(x[j][i], I[i]));
            comps.push_back(g->product(std::move(f)));
        }
        model.probabilities.push_back(g->mul(g->constant(Rational(static_cast<unsigned long>(coeff))), g->sum(std::move(comps))));
        model.labels.push_back(tuple_label(I));
        model.state_tuples.push_back(I);
    }
    model.domain.kind = DomainKind::product_of_simplices;
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < m; ++i)
            model.domain.inequalities.push_back(x[j][i]);
    if (k > 1)
        for (int j = 0; j < k; ++j)
            model.domain.inequalities.push_back(y[j]);

    // Label swapping: permute the rows of x together with the entries of y.
    if (k > 1) {
        std::vector<int> perm(k);
        std::iota(perm.begin(), perm.end(), 0);
        while (std::next_permutation(perm.begin(), perm.end())) {
            AffineMap a;
            a.linear.resize(d, d);
            a.offset.assign(d, 0.0);
            for (int j = 0; j < k; ++j)
                for (int i = 0; i < m - 1; ++i)
                    a.linear(xi(j, i), xi(perm[j], i)) = 1.0;
            for (int j = 0; j < k - 1; ++j) {
                if (perm[j] < k - 1) {
                    a.linear(y0 + j, y0 + perm[j]) = 1.0;
                } else {
                    a.offset[y0 + j] = 1.0;
                    for (int t = 0; t < k - 1; ++t)
                        a.linear(y0 + j, y0 + t) = -1.0;
                }
            }
            model.group.push_back(std::move(a));
        }
    }

    static const std::map<std::array<int, 3>, std::uint64_t> ml_degrees = {
        {{2, 2, 4}, 12},   {{2, 2, 5}, 39},    {{2, 2, 6}, 82},   {{2, 2, 7}, 158}, {{2, 2, 8}, 268},
        {{2, 2, 9}, 427},  {{2, 2, 10}, 634},  {{2, 3, 6}, 111},  {{2, 3, 7}, 645}, {{3, 2, 3}, 121},
        {{3, 2, 4}, 1449}, {{3, 2, 5}, 8727},  {{3, 3, 3}, 646}};
    if (auto it = ml_degrees.find({m, k, l}); it != ml_degrees.end())
        model.known_solution_count = it->second * factorial(k);
    model.graph = g;
    check_sum_to_one(model);
    return model;
}

ModelSpec simplex_model(int n)
{
    if (n < 1)
        throw ModelError("simplex model needs n >= 1");
    auto g = std::make_shared<ExprGraph>(n, n + 1);
    ModelSpec model;
    model.name = "simplex n=" + std::to_string(n);
    model.descriptor = {Family::simplex};
    model.descriptor.n = n;
    model.num_unknowns = n;
    std::vector<ExprId> rest{g->one()};
    for (int i = 0; i < n; ++i)
        rest.push_back(g->negate(g->var(i)));
    model.probabilities.push_back(g->sum(std::move(rest)));
    for (int i = 0; i < n; ++i)
        model.probabilities.push_back(g->var(i));
    for (int i = 0; i <= n; ++i) {
        model.labels.push_back(std::to_string(i));
        model.state_tuples.push_back({i});
    }
    for (int i = 1; i <= n; ++i)
        model.unknown_names.push_back("x" + std::to_string(i));
    model.domain.kind = DomainKind::polytope;
    model.domain.inequalities = model.probabilities;
    model.linear = true;
    model.known_solution_count = 1;
    model.graph = g;
    check_sum_to_one(model);
    return model;
}

ModelSpec independence_model()
{
    auto g = std::make_shared<ExprGraph>(2, 4);
    ModelSpec model;
    model.name = "independence 2x2";
    model.descriptor = {Family::independence};
    model.num_unknowns = 2;
    model.unknown_names = {"x1", "x2"};
    ExprId q1 = g->add(g->one(), g->var(0));
    ExprId q2 = g->add(g->one(), g->var(1));
    ExprId inv = g->mul(g->reciprocal(q1), g->reciprocal(q2));
    for (int i = 0; i <= 1; ++i)
        for (int j = 0; j <= 1; ++j) {
            std::vector<ExprId> f{inv};
            if (i)
                f.push_back(g->var(0));
            if (j)
                f.push_back(g->var(1));
            model.probabilities.push_back(g->product(std::move(f)));
            model.labels.push_back(std::to_string(i) + std::to_string(j));
            model.state_tuples.push_back({i, j});
        }
    model.domain.kind = DomainKind::orthant;
    model.domain.inequalities = {g->var(0), g->var(1)};
    model.known_solution_count = 1;

    PositiveChart chart;
    chart.to_base = {g->var(0), g->var(1)};
    auto inv_graph = std::make_shared<ExprGraph>(2, 0);
    chart.from_base = {inv_graph->var(0), inv_graph->var(1)};
    chart.inverse_graph = inv_graph;
    chart.factors = {q1, q2};
    chart.factor_text = {"1 + x1", "1 + x2"};
    // states in order 00, 01, 10, 11
    chart.u_map = {{0, 0, 1, 1}, {0, 1, 0, 1}};
    chart.v_map = {{1, 1, 1, 1}, {1, 1, 1, 1}};
    model.chart = std::move(chart);
    model.graph = g;
    check_sum_to_one(model);
    return model;
}

ModelSpec positive_chart(const ModelSpec& model)
{
    if (model.chart && !model.chart->base)
        return model; // positive as constructed
    const Family fam = model.descriptor.family;
    if (fam != Family::chy && fam != Family::cegm3 && fam != Family::simplex)
        throw ModelError("no positive chart for family " + family_name(fam));
    if (model.descriptor.chart)
        throw ModelError("model is already expressed in a positive chart");

    const std::size_t d = model.num_unknowns;
    auto g = std::make_shared<ExprGraph>(d, model.num_states());
    auto ig = std::make_shared<ExprGraph>(d, 0);
    FracContext ctx{d, Poly::constant(d, 1)};
    std::vector<Frac> base_fracs;
    std::vector<ExprId> to_base, from_base;
    std::vector<std::string> chart_names;

    if (fam == Family::chy || fam == Family::simplex) {
        // x_j = (y_1 + ... + y_j)/(1 + y_1 + ... + y_d) for CHY; x_i = y_i/(1 + Σy) for the simplex.
        Poly denom = Poly::constant(d, 1);
        for (std::size_t i = 0; i < d; ++i)
            denom = denom + Poly::variable(d, i);
        ctx.denom = denom;
        Poly partial;
        for (std::size_t j = 0; j < d; ++j) {
            Poly num = fam == Family::chy ? (partial = partial + Poly::variable(d, j)) : Poly::variable(d, j);
            base_fracs.push_back({num, 1});
        }
        ExprId dinv = g->reciprocal(poly_expr(*g, denom));
        for (std::size_t j = 0; j < d; ++j)
            to_base.push_back(g->mul(poly_expr(*g, base_fracs[j].num), dinv));
        for (std::size_t j = 0; j < d; ++j)
            chart_names.push_back("y" + std::to_string(j + 1));
        if (fam == Family::chy) {
            ExprId scale = ig->reciprocal(ig->sub(ig->one(), ig->var(d - 1)));
            for (std::size_t j = 0; j < d; ++j) {
                ExprId diff = j == 0 ? ig->var(0) : ig->sub(ig->var(j), ig->var(j - 1));
                from_base.push_back(ig->mul(diff, scale));
            }
        } else {
            std::vector<ExprId> rest{ig->one()};
            for (std::size_t j = 0; j < d; ++j)
                rest.push_back(ig->negate(ig->var(j)));
            ExprId scale = ig->reciprocal(ig->sum(std::move(rest)));
            for (std::size_t j = 0; j < d; ++j)
                from_base.push_back(ig->mul(ig->var(j), scale));
        }
    } else {
        // CEGM: x_0 = y_0 = 1, x_l = x_{l-1} + z_l, y_l = y_{l-1} + z_l (1 + w_1 + ... + w_l).
        const std::size_t r = d / 2;
        Poly xs = Poly::constant(d, 1), ys = Poly::constant(d, 1), wsum = Poly::constant(d, 1);
        std::vector<Poly> xp, yp;
        for (std::size_t l = 0; l < r; ++l) {
            Poly z = Poly::variable(d, l);
            wsum = wsum + Poly::variable(d, r + l);
            xs = xs + z;
            ys = ys + z * wsum;
            xp.push_back(xs);
            yp.push_back(ys);
        }
        for (std::size_t l = 0; l < r; ++l)
            base_fracs.push_back({xp[l], 0});
        for (std::size_t l = 0; l < r; ++l)
            base_fracs.push_back({yp[l], 0});
        for (const Frac& f : base_fracs)
            to_base.push_back(poly_expr(*g, f.num));
        for (std::size_t l = 0; l < r; ++l)
            chart_names.push_back("z" + std::to_string(l + 1));
        for (std::size_t l = 0; l < r; ++l)
            chart_names.push_back("w" + std::to_string(l + 1));
        std::vector<ExprId> z(r), big_w(r);
        for (std::size_t l = 0; l < r; ++l) {
            ExprId xprev = l == 0 ? ig->one() : ig->var(l - 1);
            ExprId yprev = l == 0 ? ig->one() : ig->var(r + l - 1);
            z[l] = ig->sub(ig->var(l), xprev);
            big_w[l] = ig->sub(ig->div(ig->sub(ig->var(r + l), yprev), z[l]), ig->one());
        }
        from_base.assign(d, ig->zero());
        for (std::size_t l = 0; l < r; ++l) {
            from_base[l] = z[l];
            from_base[r + l] = l == 0 ? big_w[0] : ig->sub(big_w[l], big_w[l - 1]);
        }
    }

    // Split each probability into constant · monomial · positive factor / D^e.
    const std::size_t ns = model.num_states();
    std::vector<Poly> factor_polys;
    PositiveChart chart;
    chart.u_map.assign(d, std::vector<long>(ns, 0));
    const bool has_denominator = fam != Family::cegm3;
    if (has_denominator) {
        factor_polys.push_back(ctx.denom);
        chart.v_map.push_back(std::vector<long>(ns, 0));
    }
    ExprId dinv = has_denominator ? g->reciprocal(poly_expr(*g, ctx.denom)) : g->one();

    ModelSpec out;
    for (std::size_t i = 0; i < ns; ++i) {
        Frac f = to_frac(*model.graph, model.probabilities[i], base_fracs, ctx);
        if (f.num.is_zero())
            throw ModelError("state " + model.labels[i] + " has an identically zero probability");
        Monomial content = f.num.terms.begin()->first;
        for (const auto& [e, c] : f.num.terms)
            for (std::size_t v = 0; v < d; ++v)
                content[v] = std::min(content[v], e[v]);
        Poly rest;
        for (const auto& [e, c] : f.num.terms) {
            Monomial e2 = e;
            for (std::size_t v = 0; v < d; ++v)
                e2[v] -= content[v];
            rest.terms[e2] = c;
        }
        const int sign = sgn(rest.terms.begin()->second);
        for (const auto& [e, c] : rest.terms)
            if (sgn(c) != sign)
                throw ModelError("chart factor for state " + model.labels[i] + " has mixed-sign coefficients");
        Rational lead = rest.terms.begin()->second;
        Poly normalized = scale(rest, 1 / lead);

        for (std::size_t v = 0; v < d; ++v)
            chart.u_map[v][i] += content[v];
        std::vector<ExprId> parts{g->constant(lead)};
        for (std::size_t v = 0; v < d; ++v)
            if (content[v] > 0)
                parts.push_back(g->power(g->var(v), content[v]));
        if (!(normalized.terms.size() == 1 && normalized.terms.begin()->first == Monomial(d, 0))) {
            std::size_t idx = 0;
            while (idx < factor_polys.size() && factor_polys[idx].terms != normalized.terms)
                ++idx;
            if (idx == factor_polys.size()) {
                factor_polys.push_back(normalized);
                chart.v_map.push_back(std::vector<long>(ns, 0));
            }
            chart.v_map[idx][i] -= 1;
            parts.push_back(poly_expr(*g, normalized));
        }
        if (has_denominator && f.dexp > 0) {
            chart.v_map[0][i] += f.dexp;
            parts.push_back(g->power(dinv, f.dexp));
        }
        out.probabilities.push_back(g->product(std::move(parts)));
    }
    for (const Poly& p : factor_polys) {
        chart.factors.push_back(poly_expr(*g, p));
        chart.factor_text.push_back(poly_text(p, chart_names));
    }
    chart.base = std::make_shared<const ModelSpec>(model);
    chart.to_base = std::move(to_base);
    chart.inverse_graph = ig;
    chart.from_base = std::move(from_base);

    out.name = model.name + " (positive chart)";
    out.descriptor = model.descriptor;
    out.descriptor.chart = true;
    out.num_unknowns = d;
    out.unknown_names = chart_names;
    out.labels = model.labels;
    out.state_tuples = model.state_tuples;
    out.domain.kind = DomainKind::orthant;
    for (std::size_t v = 0; v < d; ++v)
        out.domain.inequalities.push_back(g->var(v));
    out.linear = false;
    out.potential_only = model.potential_only;
    out.known_solution_count = model.known_solution_count;
    out.chart = std::move(chart);
    out.graph = g;
    check_sum_to_one(out);
    return out;
}

ModelSpec make_model(const ModelDescriptor& desc)
{
    ModelSpec base;
    switch (desc.family) {
    case Family::chy:
        base = chy_model(desc.m);
        break;
    case Family::cegm3:
        base = cegm3_model(desc.m);
        break;
    case Family::linear:
        base = random_linear_model(desc.n, desc.d, desc.seed);
        break;
    case Family::tensor:
        base = tensor_model(desc.m, desc.k, desc.l);
        break;
    case Family::simplex:
        base = simplex_model(desc.n);
        break;
    case Family::independence:
        base = independence_model();
        break;
    }
    if (desc.chart && desc.family != Family::independence)
        return positive_chart(base);
    return base;
}

Potential build_potential(const ModelSpec& model)
{
    if (model.num_states() == 0)
        throw ModelError(model.name + ": model has no states");
    // Reject arguments that vanish identically, structurally or numerically.
    std::mt19937_64 rng(0x9075);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::vector<Complex>> probes;
    for (int t = 0; t < 3; ++t) {
        std::vector<Complex> x(model.num_unknowns);
        for (auto& v : x)
            v = {u(rng), u(rng)};
        probes.push_back(std::move(x));
    }
    std::vector<bool> nonzero(model.num_states(), false);
    for (const auto& x : probes) {
        try {
            auto vals = evaluate_probabilities<Complex>(model, x);
            for (std::size_t i = 0; i < vals.size(); ++i)
                if (vals[i] != Complex(0.0))
                    nonzero[i] = true;
        } catch (const SingularEvaluation&) {
            std::fill(nonzero.begin(), nonzero.end(), true); // a pole means the expression is not zero
        }
    }
    std::vector<PotentialTerm> terms;
    for (std::size_t i = 0; i < model.num_states(); ++i) {
        if (model.graph->is_zero(model.probabilities[i]) || !nonzero[i])
            throw ModelError(model.name + ": probability of state " + model.labels[i] + " is identically zero");
        terms.push_back({i, model.probabilities[i]});
    }
    return Potential(model.graph, std::move(terms), model.linear);
}

double sum_to_one_defect(const ModelSpec& model, int samples, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    Tape tape(*model.graph, model.probabilities);
    std::vector<double> out(model.num_states()), slots, x(model.num_unknowns);
    std::vector<double> no_params(model.graph->num_params(), 0.0);
    double worst = 0.0;
    for (int t = 0; t < samples; ++t) {
        for (auto& v : x)
            v = u(rng);
        // keep ordered-cube models inside their region so every p_i is moderate
        if (model.domain.kind == DomainKind::ordered_cube)
            std::sort(x.begin(), x.end());
        tape.eval<double>(x, no_params, out, slots);
        double s = 0.0, mag = 0.0;
        for (double p : out) {
            s += p;
            mag += std::fabs(p);
        }
        worst = std::max(worst, std::fabs(s - 1.0) / std::max(1.0, mag));
    }
    return worst;
}

std::vector<Complex> sample_generic_point(const ModelSpec& model, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(0.2, 1.0);
    std::vector<Complex> x(model.num_unknowns);
    if (model.descriptor.family == Family::tensor && !model.descriptor.chart) {
        const int m = model.descriptor.m, k = model.descriptor.k;
        std::vector<std::vector<double>> rows(k, std::vector<double>(m));
        for (auto& row : rows) {
            double s = 0.0;
            for (auto& v : row)
                s += (v = pos(rng));
            for (auto& v : row)
                v /= s;
        }
        std::vector<double> y(k);
        double s = 0.0;
        for (auto& v : y)
            s += (v = pos(rng));
        for (auto& v : y)
            v /= s;
        std::size_t idx = 0;
        for (int j = 0; j < k; ++j)
            for (int i = 0; i < m - 1; ++i)
                x[idx++] = {rows[j][i] + 0.05 * u(rng), 0.05 * u(rng)};
        for (int j = 0; j < k - 1; ++j)
            x[idx++] = {y[j] + 0.05 * u(rng), 0.05 * u(rng)};
        return x;
    }
    for (auto& v : x)
        v = {u(rng), u(rng)};
    return x;
}

std::vector<Complex> to_chart_coordinates(const PositiveChart& chart, std::span<const Complex> x)
{
    Tape tape(*chart.inverse_graph, chart.from_base);
    std::vector<Complex> out(chart.from_base.size()), slots;
    tape.eval<Complex>(x, {}, std::span<Complex>(out), slots);
    return out;
}

std::vector<Complex> from_chart_coordinates(const ModelSpec& chart_model, std::span<const Complex> y)
{
    if (!chart_model.chart)
        throw ModelError(chart_model.name + " has no positive chart");
    Tape tape(*chart_model.graph, chart_model.chart->to_base);
    std::vector<Complex> out(chart_model.chart->to_base.size()), slots;
    std::vector<Complex> no_params(chart_model.graph->num_params(), Complex(0.0));
    tape.eval<Complex>(y, no_params, std::span<Complex>(out), slots);
    return out;
}

} // namespace mlsolve
