#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace stochpmp {

/// Position of t, x and a inside the flat variable vector that every
/// coefficient polynomial is evaluated on: [t, x_1..x_n, a_1..a_k].
struct VariableLayout {
    std::size_t state_dim = 1;
    std::size_t control_dim = 1;

    std::size_t size() const { return 1 + state_dim + control_dim; }
    static constexpr std::size_t time() { return 0; }
    std::size_t state(std::size_t i) const { return 1 + i; }
    std::size_t control(std::size_t j) const { return 1 + state_dim + j; }
};

/// Sparse multivariate polynomial with real coefficients and nonnegative
/// integer exponents. Terms keep insertion order; a term whose exponent vector
/// is already present is merged into it.
class Polynomial {
public:
    struct Term {
        double coeff = 0.0;
        std::vector<int> powers;
    };

    Polynomial() = default;
    explicit Polynomial(std::size_t num_vars) : num_vars_(num_vars) {}

    static Polynomial constant(std::size_t num_vars, double value);
    /// c * v_var
    static Polynomial variable(std::size_t num_vars, std::size_t var, double c = 1.0);

    void add_term(double coeff, std::vector<int> powers);

    double evaluate(std::span<const double> vars) const;
    Polynomial derivative(std::size_t var) const;

    bool is_zero() const;
    bool depends_on(std::size_t var) const;
    int degree() const;

    std::size_t num_vars() const { return num_vars_; }
    const std::vector<Term>& terms() const { return terms_; }

    Polynomial& operator+=(const Polynomial& other);
    Polynomial& operator*=(double s);
    friend Polynomial operator*(const Polynomial& lhs, const Polynomial& rhs);
    friend Polynomial operator+(Polynomial lhs, const Polynomial& rhs) { return lhs += rhs; }
    friend Polynomial operator*(double s, Polynomial p) { return p *= s; }
    friend bool operator==(const Polynomial& lhs, const Polynomial& rhs);

private:
    std::size_t num_vars_ = 0;
    std::vector<Term> terms_;
};

}  // namespace stochpmp
