#pragma once

// Expression DAG for rational functions of unknowns x and parameters s.
//
// Nodes are hash-consed, so structurally identical subtrees share one id.
// Denominators only ever enter through reciprocal nodes; nothing here clears
// or expands them. Evaluation goes through a compiled Tape, which is immutable
// and can be shared between threads; each thread supplies its own scratch.

#include "mlsolve/linalg.hpp"
#include "mlsolve/rational.hpp"
#include "mlsolve/scalar.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mlsolve {

enum class Op : std::uint8_t { constant, variable, parameter, sum, product, power, negate, reciprocal };

struct ExprId {
    std::uint32_t index = 0;
    friend bool operator==(ExprId, ExprId) = default;
};

class ExprGraph {
public:
    struct Node {
        Op op = Op::constant;
        std::int32_t exponent = 0;   // power nodes
        std::uint32_t ref = 0;       // variable/parameter/constant index, or the child of a unary node
        std::uint32_t args_begin = 0; // sum/product children live in args_[begin, begin+count)
        std::uint32_t args_count = 0;
        std::uint64_t hash = 0;      // structural, independent of node numbering
    };

    ExprGraph(std::size_t num_vars, std::size_t num_params);

    std::size_t num_vars() const { return num_vars_; }
    std::size_t num_params() const { return num_params_; }
    std::size_t size() const { return nodes_.size(); }

    ExprId zero() const { return zero_; }
    ExprId one() const { return one_; }
    ExprId constant(const Rational& value);
    ExprId constant(long value) { return constant(Rational(value)); }
    ExprId var(std::size_t i);
    ExprId param(std::size_t i);

    ExprId sum(std::vector<ExprId> terms);
    ExprId product(std::vector<ExprId> factors);
    ExprId power(ExprId base, int exponent);
    ExprId negate(ExprId e);
    ExprId reciprocal(ExprId e);

    ExprId add(ExprId a, ExprId b) { return sum({a, b}); }
    ExprId sub(ExprId a, ExprId b) { return sum({a, negate(b)}); }
    ExprId mul(ExprId a, ExprId b) { return product({a, b}); }
    ExprId div(ExprId a, ExprId b) { return product({a, reciprocal(b)}); }

    /// Symbolic partial derivative with respect to unknown `var`, memoized.
    ExprId derivative(ExprId e, std::size_t var);
    /// Symbolic partial derivative with respect to parameter `param`.
    ExprId parameter_derivative(ExprId e, std::size_t param);

    /// Copies `e` from `src` (which may be *this) replacing variable i by
    /// var_map[i] and parameter j by param_map[j]. Empty maps keep the symbol.
    ExprId import(const ExprGraph& src, ExprId e, std::span<const ExprId> var_map = {},
                  std::span<const ExprId> param_map = {});

    const Node& node(ExprId e) const { return nodes_[e.index]; }
    std::span<const std::uint32_t> children(ExprId e) const;
    bool is_constant(ExprId e) const { return nodes_[e.index].op == Op::constant; }
    bool is_zero(ExprId e) const { return e == zero_; }
    bool is_one(ExprId e) const { return e == one_; }
    const Rational& constant_value(ExprId e) const;
    std::uint64_t hash(ExprId e) const { return nodes_[e.index].hash; }
    const std::vector<Rational>& constants() const { return constants_; }

    std::string to_string(ExprId e) const;

private:
    ExprId intern(Node n, const std::vector<std::uint32_t>& args);
    ExprId derive(ExprId e, std::uint32_t symbol);

    std::size_t num_vars_;
    std::size_t num_params_;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> args_;
    std::vector<Rational> constants_;
    std::unordered_multimap<std::uint64_t, std::uint32_t> table_;
    std::unordered_map<std::uint64_t, std::uint32_t> derivative_memo_;
    ExprId zero_;
    ExprId one_;
};

/// Straight-line program compiled from a set of roots of an ExprGraph.
class Tape {
public:
    Tape() = default;
    Tape(const ExprGraph& graph, std::span<const ExprId> roots);

    std::size_t num_outputs() const { return outputs_.size(); }
    std::size_t num_vars() const { return num_vars_; }
    std::size_t num_params() const { return num_params_; }
    std::size_t length() const { return code_.size(); }

    /// Evaluates every root. `slots` is caller-owned scratch, reused across calls.
    template <class T>
    void eval(std::span<const T> x, std::span<const T> s, std::span<T> out, std::vector<T>& slots) const;

private:
    struct Instr {
        Op op;
        std::int32_t exponent;
        std::uint32_t ref;
        std::uint32_t begin;
        std::uint32_t count;
    };
    struct Constant {
        double value, lo, hi;
        Rational exact;
    };

    std::vector<Instr> code_;
    std::vector<std::uint32_t> args_;
    std::vector<Constant> constants_;
    std::vector<std::uint32_t> outputs_;
    std::size_t num_vars_ = 0;
    std::size_t num_params_ = 0;
};

struct PotentialTerm {
    std::size_t parameter = 0;
    ExprId argument;
};

/// L = Σ s_k · log(argument_k). The logarithm is never evaluated, only differentiated.
class Potential {
public:
    Potential(std::shared_ptr<const ExprGraph> graph, std::vector<PotentialTerm> terms, bool linear_model = false);

    const ExprGraph& graph() const { return *graph_; }
    std::shared_ptr<const ExprGraph> graph_ptr() const { return graph_; }
    const std::vector<PotentialTerm>& terms() const { return terms_; }
    std::size_t num_vars() const { return graph_->num_vars(); }
    std::size_t num_params() const { return graph_->num_params(); }
    bool linear_model() const { return linear_model_; }

private:
    std::shared_ptr<const ExprGraph> graph_;
    std::vector<PotentialTerm> terms_;
    bool linear_model_;
};

/// Square system F(x; s) = 0 with symbolic Jacobians and compiled tapes.
class RationalSystem {
public:
    /// `equations` live in `graph`; the graph is taken over and extended with
    /// derivative nodes.
    RationalSystem(std::unique_ptr<ExprGraph> graph, std::vector<ExprId> equations, bool linear_model = false);

    std::size_t dim() const { return equations_.size(); }
    std::size_t num_params() const { return graph_->num_params(); }
    const ExprGraph& graph() const { return *graph_; }
    std::span<const ExprId> equations() const { return equations_; }
    /// Row-major d×d entries ∂F_i/∂x_j.
    std::span<const ExprId> jacobian_entries() const { return jacobian_; }
    /// Set for linear statistical models; permits real-field tracking.
    bool linear_model() const { return linear_model_; }

    const Tape& residual_tape() const { return residual_; }
    /// Outputs F (d values) followed by J (d² values, row-major).
    const Tape& residual_jacobian_tape() const { return residual_jacobian_; }
    /// Parameters [s, σ] (2·num_params); outputs J(x; s) then Σ_k σ_k ∂F/∂s_k(x; s).
    const Tape& predictor_tape() const { return predictor_; }

private:
    std::unique_ptr<ExprGraph> graph_;
    std::vector<ExprId> equations_;
    std::vector<ExprId> jacobian_;
    bool linear_model_;
    Tape residual_;
    Tape residual_jacobian_;
    Tape predictor_;
};

/// Builds ∂L/∂x_j = Σ_k s_k (∂p_k/∂x_j) / p_k, keeping every p_k as a reciprocal node.
RationalSystem gradient(const Potential& potential);

template <class T>
struct EvalWorkspace {
    std::vector<T> slots;
    std::vector<T> out;
};

template <class T>
void evaluate(const RationalSystem& sys, std::span<const T> x, std::span<const T> s, std::span<T> out,
              EvalWorkspace<T>& ws)
{
    sys.residual_tape().eval<T>(x, s, out, ws.slots);
}

template <class T>
std::vector<T> evaluate(const RationalSystem& sys, std::span<const T> x, std::span<const T> s)
{
    EvalWorkspace<T> ws;
    std::vector<T> out(sys.dim());
    evaluate<T>(sys, x, s, std::span<T>(out), ws);
    return out;
}

/// F and its Jacobian at one point.
template <class T>
void evaluate_with_jacobian(const RationalSystem& sys, std::span<const T> x, std::span<const T> s, std::span<T> f,
                            Matrix<T>& jac, EvalWorkspace<T>& ws)
{
    const std::size_t d = sys.dim();
    ws.out.resize(d + d * d);
    sys.residual_jacobian_tape().eval<T>(x, s, std::span<T>(ws.out), ws.slots);
    for (std::size_t i = 0; i < d; ++i)
        f[i] = ws.out[i];
    if (jac.rows() != d || jac.cols() != d)
        jac.resize(d, d);
    auto jd = jac.data();
    for (std::size_t k = 0; k < d * d; ++k)
        jd[k] = ws.out[d + k];
}

template <class T>
Matrix<T> jacobian(const RationalSystem& sys, std::span<const T> x, std::span<const T> s)
{
    EvalWorkspace<T> ws;
    std::vector<T> f(sys.dim());
    Matrix<T> jac(sys.dim(), sys.dim());
    evaluate_with_jacobian<T>(sys, x, s, std::span<T>(f), jac, ws);
    return jac;
}

/// Toric Hessian H_ij = x_i x_j ∂²L/∂x_i∂x_j + [i=j] x_i ∂L/∂x_i for the
/// potential whose gradient is `grad`. Throws ModelError on a zero coordinate.
Matrix<Complex> toric_hessian(const RationalSystem& grad, std::span<const Complex> x, std::span<const Complex> s);
Matrix<double> toric_hessian(const RationalSystem& grad, std::span<const double> x, std::span<const double> s);

// ---------------------------------------------------------------------------

template <class T>
void Tape::eval(std::span<const T> x, std::span<const T> s, std::span<T> out, std::vector<T>& slots) const
{
    if (slots.size() < code_.size())
        slots.resize(code_.size());
    T* v = slots.data();
    const std::uint32_t* args = args_.data();
    const std::size_t n = code_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Instr& in = code_[i];
        switch (in.op) {
        case Op::constant: {
            const Constant& c = constants_[in.ref];
            if constexpr (requires { ScalarTraits<T>::from_rational(c.exact); })
                v[i] = ScalarTraits<T>::from_rational(c.exact);
            else
                v[i] = ScalarTraits<T>::constant(c.value, c.lo, c.hi);
            break;
        }
        case Op::variable:
            v[i] = x[in.ref];
            break;
        case Op::parameter:
            v[i] = s[in.ref];
            break;
        case Op::sum: {
            const std::uint32_t* a = args + in.begin;
            T acc = v[a[0]];
            for (std::uint32_t k = 1; k < in.count; ++k)
                acc += v[a[k]];
            v[i] = acc;
            break;
        }
        case Op::product: {
            const std::uint32_t* a = args + in.begin;
            T acc = v[a[0]];
            for (std::uint32_t k = 1; k < in.count; ++k)
                acc = acc * v[a[k]];
            v[i] = acc;
            break;
        }
        case Op::power:
            v[i] = integer_power(v[in.ref], in.exponent);
            break;
        case Op::negate:
            v[i] = -v[in.ref];
            break;
        case Op::reciprocal:
            v[i] = ScalarTraits<T>::reciprocal(v[in.ref]);
            break;
        }
    }
    for (std::size_t k = 0; k < outputs_.size(); ++k)
        out[k] = v[outputs_[k]];
}

} // namespace mlsolve
