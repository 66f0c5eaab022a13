#include "mlsolve/expr.hpp"

#include "mlsolve/errors.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace mlsolve {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v)
{
    // splitmix64 finalizer over the running combination
    std::uint64_t z = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint32_t kNone = 0xffffffffu;

} // namespace

ExprGraph::ExprGraph(std::size_t num_vars, std::size_t num_params) : num_vars_(num_vars), num_params_(num_params)
{
    zero_ = constant(Rational(0));
    one_ = constant(Rational(1));
}

std::span<const std::uint32_t> ExprGraph::children(ExprId e) const
{
    const Node& n = nodes_[e.index];
    return {args_.data() + n.args_begin, n.args_count};
}

const Rational& ExprGraph::constant_value(ExprId e) const
{
    const Node& n = nodes_[e.index];
    if (n.op != Op::constant)
        throw ModelError("constant_value on a non-constant node");
    return constants_[n.ref];
}

ExprId ExprGraph::intern(Node n, const std::vector<std::uint32_t>& args)
{
    std::uint64_t h = mix(static_cast<std::uint64_t>(n.op) + 1, static_cast<std::uint64_t>(n.exponent));
    switch (n.op) {
    case Op::constant:
        h = mix(h, fnv1a(constants_[n.ref].get_str()));
        break;
    case Op::variable:
    case Op::parameter:
        h = mix(h, n.ref);
        break;
    case Op::power:
    case Op::negate:
    case Op::reciprocal:
        h = mix(h, nodes_[n.ref].hash);
        break;
    case Op::sum:
    case Op::product:
        for (std::uint32_t a : args)
            h = mix(h, nodes_[a].hash);
        break;
    }
    n.hash = h;

    auto range = table_.equal_range(h);
    for (auto it = range.first; it != range.second; ++it) {
        const Node& m = nodes_[it->second];
        if (m.op != n.op || m.exponent != n.exponent)
            continue;
        bool same = false;
        switch (n.op) {
        case Op::constant:
            same = constants_[m.ref] == constants_[n.ref];
            break;
        case Op::variable:
        case Op::parameter:
        case Op::power:
        case Op::negate:
        case Op::reciprocal:
            same = m.ref == n.ref;
            break;
        case Op::sum:
        case Op::product:
            same = m.args_count == args.size() &&
                   std::equal(args.begin(), args.end(), args_.begin() + m.args_begin);
            break;
        }
        if (same) {
            if (n.op == Op::constant)
                constants_.pop_back();
            return ExprId{it->second};
        }
    }
    if (!args.empty()) {
        n.args_begin = static_cast<std::uint32_t>(args_.size());
        n.args_count = static_cast<std::uint32_t>(args.size());
        args_.insert(args_.end(), args.begin(), args.end());
    }
    auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(n);
    table_.emplace(h, id);
    return ExprId{id};
}

ExprId ExprGraph::constant(const Rational& value)
{
    Rational v = value;
    v.canonicalize();
    constants_.push_back(v);
    Node n;
    n.op = Op::constant;
    n.ref = static_cast<std::uint32_t>(constants_.size() - 1);
    return intern(n, {});
}

ExprId ExprGraph::var(std::size_t i)
{
    if (i >= num_vars_)
        throw ModelError("variable index " + std::to_string(i) + " out of range");
    Node n;
    n.op = Op::variable;
    n.ref = static_cast<std::uint32_t>(i);
    return intern(n, {});
}

ExprId ExprGraph::param(std::size_t i)
{
    if (i >= num_params_)
        throw ModelError("parameter index " + std::to_string(i) + " out of range");
    Node n;
    n.op = Op::parameter;
    n.ref = static_cast<std::uint32_t>(i);
    return intern(n, {});
}

ExprId ExprGraph::sum(std::vector<ExprId> terms)
{
    Rational c = 0;
    std::vector<std::uint32_t> flat;
    flat.reserve(terms.size());
    auto take = [&](std::uint32_t id) {
        if (nodes_[id].op == Op::constant)
            c += constants_[nodes_[id].ref];
        else
            flat.push_back(id);
    };
    for (ExprId t : terms) {
        const Node& n = nodes_[t.index];
        if (n.op == Op::sum) {
            for (std::uint32_t k = 0; k < n.args_count; ++k)
                take(args_[n.args_begin + k]);
        } else {
            take(t.index);
        }
    }
    if (c != 0)
        flat.push_back(constant(c).index);
    if (flat.empty())
        return zero_;
    if (flat.size() == 1)
        return ExprId{flat[0]};
    std::sort(flat.begin(), flat.end(), [&](std::uint32_t a, std::uint32_t b) {
        return nodes_[a].hash != nodes_[b].hash ? nodes_[a].hash < nodes_[b].hash : a < b;
    });
    Node n;
    n.op = Op::sum;
    return intern(n, flat);
}

ExprId ExprGraph::product(std::vector<ExprId> factors)
{
    Rational c = 1;
    std::vector<std::uint32_t> flat;
    flat.reserve(factors.size());
    bool is_zero_product = false;
    std::function<void(std::uint32_t)> take = [&](std::uint32_t id) {
        const Node& n = nodes_[id];
        if (n.op == Op::constant) {
            c *= constants_[n.ref];
            if (c == 0)
                is_zero_product = true;
        } else if (n.op == Op::negate) {
            c = -c;
            take(n.ref);
        } else if (n.op == Op::product) {
            for (std::uint32_t k = 0; k < n.args_count; ++k)
                take(args_[n.args_begin + k]);
        } else {
            flat.push_back(id);
        }
    };
    for (ExprId f : factors)
        take(f.index);
    if (is_zero_product)
        return zero_;
    if (flat.empty())
        return constant(c);
    std::sort(flat.begin(), flat.end(), [&](std::uint32_t a, std::uint32_t b) {
        return nodes_[a].hash != nodes_[b].hash ? nodes_[a].hash < nodes_[b].hash : a < b;
    });
    ExprId core;
    if (flat.size() == 1) {
        core = ExprId{flat[0]};
    } else {
        Node n;
        n.op = Op::product;
        core = intern(n, flat);
    }
    if (c == 1)
        return core;
    if (c == -1)
        return negate(core);
    Node n;
    n.op = Op::product;
    std::vector<std::uint32_t> with_const{constant(c).index};
    if (nodes_[core.index].op == Op::product) {
        const Node& cn = nodes_[core.index];
        with_const.insert(with_const.end(), args_.begin() + cn.args_begin, args_.begin() + cn.args_begin + cn.args_count);
    } else {
        with_const.push_back(core.index);
    }
    std::sort(with_const.begin(), with_const.end(), [&](std::uint32_t a, std::uint32_t b) {
        return nodes_[a].hash != nodes_[b].hash ? nodes_[a].hash < nodes_[b].hash : a < b;
    });
    return intern(n, with_const);
}

ExprId ExprGraph::power(ExprId base, int exponent)
{
    if (exponent == 0)
        return one_;
    if (exponent == 1)
        return base;
    const Node& b = nodes_[base.index];
    if (b.op == Op::constant) {
        Rational v = constants_[b.ref];
        if (v == 0) {
            if (exponent < 0)
                throw ModelError("negative power of the zero constant");
            return zero_;
        }
        Rational r = 1;
        for (int k = 0; k < std::abs(exponent); ++k)
            r *= v;
        if (exponent < 0)
            r = 1 / r;
        return constant(r);
    }
    if (b.op == Op::power)
        return power(ExprId{b.ref}, b.exponent * exponent);
    Node n;
    n.op = Op::power;
    n.exponent = exponent;
    n.ref = base.index;
    return intern(n, {});
}

ExprId ExprGraph::negate(ExprId e)
{
    const Node& n = nodes_[e.index];
    if (n.op == Op::constant)
        return constant(-constants_[n.ref]);
    if (n.op == Op::negate)
        return ExprId{n.ref};
    Node m;
    m.op = Op::negate;
    m.ref = e.index;
    return intern(m, {});
}

ExprId ExprGraph::reciprocal(ExprId e)
{
    const Node& n = nodes_[e.index];
    if (n.op == Op::constant) {
        if (constants_[n.ref] == 0)
            throw ModelError("reciprocal of the zero constant");
        return constant(1 / constants_[n.ref]);
    }
    if (n.op == Op::reciprocal)
        return ExprId{n.ref};
    Node m;
    m.op = Op::reciprocal;
    m.ref = e.index;
    return intern(m, {});
}

ExprId ExprGraph::derivative(ExprId e, std::size_t var)
{
    if (var >= num_vars_)
        throw ModelError("derivative variable out of range");
    return derive(e, static_cast<std::uint32_t>(var));
}

ExprId ExprGraph::parameter_derivative(ExprId e, std::size_t param)
{
    if (param >= num_params_)
        throw ModelError("derivative parameter out of range");
    return derive(e, static_cast<std::uint32_t>(num_vars_ + param));
}

ExprId ExprGraph::derive(ExprId e, std::uint32_t symbol)
{
    const std::uint64_t key = (static_cast<std::uint64_t>(e.index) << 32) | symbol;
    if (auto it = derivative_memo_.find(key); it != derivative_memo_.end())
        return ExprId{it->second};

    const Node n = nodes_[e.index];
    ExprId result = zero_;
    switch (n.op) {
    case Op::constant:
        break;
    case Op::variable:
        result = (n.ref == symbol) ? one_ : zero_;
        break;
    case Op::parameter:
        result = (num_vars_ + n.ref == symbol) ? one_ : zero_;
        break;
    case Op::sum: {
        std::vector<ExprId> parts;
        for (std::uint32_t k = 0; k < n.args_count; ++k) {
            ExprId d = derive(ExprId{args_[n.args_begin + k]}, symbol);
            if (!is_zero(d))
                parts.push_back(d);
        }
        result = sum(std::move(parts));
        break;
    }
    case Op::product: {
        std::vector<ExprId> parts;
        std::vector<std::uint32_t> kids(args_.begin() + n.args_begin, args_.begin() + n.args_begin + n.args_count);
        for (std::size_t i = 0; i < kids.size(); ++i) {
            ExprId d = derive(ExprId{kids[i]}, symbol);
            if (is_zero(d))
                continue;
            std::vector<ExprId> factors{d};
            for (std::size_t j = 0; j < kids.size(); ++j)
                if (j != i)
                    factors.push_back(ExprId{kids[j]});
            parts.push_back(product(std::move(factors)));
        }
        result = sum(std::move(parts));
        break;
    }
    case Op::power: {
        ExprId d = derive(ExprId{n.ref}, symbol);
        if (!is_zero(d))
            result = product({constant(Rational(n.exponent)), power(ExprId{n.ref}, n.exponent - 1), d});
        break;
    }
    case Op::negate: {
        ExprId d = derive(ExprId{n.ref}, symbol);
        result = negate(d);
        break;
    }
    case Op::reciprocal: {
        ExprId d = derive(ExprId{n.ref}, symbol);
        if (!is_zero(d))
            result = negate(product({power(e, 2), d}));
        break;
    }
    }
    derivative_memo_.emplace(key, result.index);
    return result;
}

ExprId ExprGraph::import(const ExprGraph& src, ExprId root, std::span<const ExprId> var_map,
                         std::span<const ExprId> param_map)
{
    std::vector<std::uint32_t> memo(src.nodes_.size(), kNone);
    std::function<ExprId(std::uint32_t)> go = [&](std::uint32_t id) -> ExprId {
        if (memo[id] != kNone)
            return ExprId{memo[id]};
        const Node n = src.nodes_[id];
        ExprId r;
        switch (n.op) {
        case Op::constant:
            r = constant(Rational(src.constants_[n.ref]));
            break;
        case Op::variable:
            r = var_map.empty() ? var(n.ref) : var_map[n.ref];
            break;
        case Op::parameter:
            r = param_map.empty() ? param(n.ref) : param_map[n.ref];
            break;
        case Op::sum:
        case Op::product: {
            std::vector<ExprId> kids;
            kids.reserve(n.args_count);
            for (std::uint32_t k = 0; k < n.args_count; ++k)
                kids.push_back(go(src.args_[n.args_begin + k]));
            r = n.op == Op::sum ? sum(std::move(kids)) : product(std::move(kids));
            break;
        }
        case Op::power:
            r = power(go(n.ref), n.exponent);
            break;
        case Op::negate:
            r = negate(go(n.ref));
            break;
        case Op::reciprocal:
            r = reciprocal(go(n.ref));
            break;
        }
        memo[id] = r.index;
        return r;
    };
    return go(root.index);
}

std::string ExprGraph::to_string(ExprId e) const
{
    const Node& n = nodes_[e.index];
    std::ostringstream os;
    switch (n.op) {
    case Op::constant:
        os << constants_[n.ref].get_str();
        break;
    case Op::variable:
        os << "x" << n.ref;
        break;
    case Op::parameter:
        os << "s" << n.ref;
        break;
    case Op::sum:
    case Op::product: {
        os << '(';
        for (std::uint32_t k = 0; k < n.args_count; ++k) {
            if (k)
                os << (n.op == Op::sum ? " + " : "*");
            os << to_string(ExprId{args_[n.args_begin + k]});
        }
        os << ')';
        break;
    }
    case Op::power:
        os << to_string(ExprId{n.ref}) << '^' << n.exponent;
        break;
    case Op::negate:
        os << "-" << to_string(ExprId{n.ref});
        break;
    case Op::reciprocal:
        os << "1/" << to_string(ExprId{n.ref});
        break;
    }
    return os.str();
}

// --- Tape ------------------------------------------------------------------

Tape::Tape(const ExprGraph& graph, std::span<const ExprId> roots)
    : num_vars_(graph.num_vars()), num_params_(graph.num_params())
{
    std::vector<std::uint32_t> slot(graph.size(), kNone);

    // Iterative post-order so deep DAGs cannot blow the stack.
    std::vector<std::pair<std::uint32_t, bool>> stack;
    for (ExprId root : roots) {
        stack.emplace_back(root.index, false);
        while (!stack.empty()) {
            auto [id, expanded] = stack.back();
            stack.pop_back();
            if (slot[id] != kNone)
                continue;
            const auto& n = graph.node(ExprId{id});
            if (!expanded) {
                stack.emplace_back(id, true);
                if (n.op == Op::sum || n.op == Op::product) {
                    for (std::uint32_t c : graph.children(ExprId{id}))
                        if (slot[c] == kNone)
                            stack.emplace_back(c, false);
                } else if (n.op == Op::power || n.op == Op::negate || n.op == Op::reciprocal) {
                    if (slot[n.ref] == kNone)
                        stack.emplace_back(n.ref, false);
                }
                continue;
            }
            Instr in{n.op, n.exponent, 0, 0, 0};
            switch (n.op) {
            case Op::constant: {
                const Rational& q = graph.constants()[n.ref];
                auto [lo, hi] = enclose(q);
                in.ref = static_cast<std::uint32_t>(constants_.size());
                constants_.push_back({to_double(q), lo, hi, q});
                break;
            }
            case Op::variable:
            case Op::parameter:
                in.ref = n.ref;
                break;
            case Op::sum:
            case Op::product:
                in.begin = static_cast<std::uint32_t>(args_.size());
                in.count = n.args_count;
                for (std::uint32_t c : graph.children(ExprId{id}))
                    args_.push_back(slot[c]);
                break;
            case Op::power:
            case Op::negate:
            case Op::reciprocal:
                in.ref = slot[n.ref];
                break;
            }
            slot[id] = static_cast<std::uint32_t>(code_.size());
            code_.push_back(in);
        }
        outputs_.push_back(slot[root.index]);
    }
}

// --- Potential and systems -------------------------------------------------

Potential::Potential(std::shared_ptr<const ExprGraph> graph, std::vector<PotentialTerm> terms, bool linear_model)
    : graph_(std::move(graph)), terms_(std::move(terms)), linear_model_(linear_model)
{
    for (const auto& t : terms_) {
        if (t.parameter >= graph_->num_params())
            throw ModelError("potential coefficient slot out of range");
        if (graph_->is_zero(t.argument))
            throw ModelError("potential term with identically zero argument (slot " + std::to_string(t.parameter) + ")");
    }
}

RationalSystem::RationalSystem(std::unique_ptr<ExprGraph> graph, std::vector<ExprId> equations, bool linear_model)
    : graph_(std::move(graph)), equations_(std::move(equations)), linear_model_(linear_model)
{
    const std::size_t d = equations_.size();
    if (d != graph_->num_vars())
        throw ModelError("system is not square: " + std::to_string(d) + " equations in " +
                         std::to_string(graph_->num_vars()) + " unknowns");
    jacobian_.reserve(d * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            jacobian_.push_back(graph_->derivative(equations_[i], j));

    residual_ = Tape(*graph_, equations_);
    std::vector<ExprId> roots = equations_;
    roots.insert(roots.end(), jacobian_.begin(), jacobian_.end());
    residual_jacobian_ = Tape(*graph_, roots);

    // Predictor program over parameters [s, σ]: J(x; s) and dF/ds · σ.
    const std::size_t np = graph_->num_params();
    ExprGraph pred(graph_->num_vars(), 2 * np);
    std::vector<ExprId> proots;
    proots.reserve(d * d + d);
    for (ExprId j : jacobian_)
        proots.push_back(pred.import(*graph_, j));
    std::vector<ExprId> sigma;
    for (std::size_t k = 0; k < np; ++k)
        sigma.push_back(pred.param(np + k));
    for (std::size_t i = 0; i < d; ++i) {
        std::vector<ExprId> parts;
        for (std::size_t k = 0; k < np; ++k) {
            ExprId dk = graph_->parameter_derivative(equations_[i], k);
            if (graph_->is_zero(dk))
                continue;
            parts.push_back(pred.mul(pred.import(*graph_, dk), sigma[k]));
        }
        proots.push_back(pred.sum(std::move(parts)));
    }
    predictor_ = Tape(pred, proots);
}

RationalSystem gradient(const Potential& potential)
{
    const ExprGraph& src = potential.graph();
    auto g = std::make_unique<ExprGraph>(src.num_vars(), src.num_params());
    const std::size_t d = src.num_vars();

    struct Term {
        ExprId coeff;
        ExprId arg;
        ExprId inv;
    };
    std::vector<Term> terms;
    for (const auto& t : potential.terms()) {
        ExprId arg = g->import(src, t.argument);
        terms.push_back({g->param(t.parameter), arg, g->reciprocal(arg)});
    }
    std::vector<ExprId> eqs;
    eqs.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<ExprId> parts;
        for (const Term& t : terms) {
            if (g->is_constant(t.arg))
                continue;
            ExprId da = g->derivative(t.arg, j);
            if (g->is_zero(da))
                continue;
            parts.push_back(g->product({t.coeff, da, t.inv}));
        }
        eqs.push_back(g->sum(std::move(parts)));
    }
    return RationalSystem(std::move(g), std::move(eqs), potential.linear_model());
}

namespace {

template <class T>
Matrix<T> toric_hessian_impl(const RationalSystem& grad, std::span<const T> x, std::span<const T> s)
{
    const std::size_t d = grad.dim();
    for (std::size_t i = 0; i < d; ++i)
        if (x[i] == T(0.0))
            throw ModelError("toric Hessian undefined at a zero coordinate (index " + std::to_string(i) + ")");
    EvalWorkspace<T> ws;
    std::vector<T> f(d);
    Matrix<T> jac;
    evaluate_with_jacobian<T>(grad, x, s, std::span<T>(f), jac, ws);
    Matrix<T> h(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            h(i, j) = x[i] * x[j] * jac(i, j) + (i == j ? x[i] * f[i] : T(0.0));
    return h;
}

} // namespace

Matrix<Complex> toric_hessian(const RationalSystem& grad, std::span<const Complex> x, std::span<const Complex> s)
{
    return toric_hessian_impl<Complex>(grad, x, s);
}

Matrix<double> toric_hessian(const RationalSystem& grad, std::span<const double> x, std::span<const double> s)
{
    return toric_hessian_impl<double>(grad, x, s);
}

} // namespace mlsolve
