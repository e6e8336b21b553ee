#include "stochpmp/polynomial.hpp"

#include <algorithm>

#include "stochpmp/error.hpp"

namespace stochpmp {

Polynomial Polynomial::constant(std::size_t num_vars, double value) {
    Polynomial p(num_vars);
    p.add_term(value, std::vector<int>(num_vars, 0));
    return p;
}

Polynomial Polynomial::variable(std::size_t num_vars, std::size_t var, double c) {
    Polynomial p(num_vars);
    std::vector<int> powers(num_vars, 0);
    powers.at(var) = 1;
    p.add_term(c, std::move(powers));
    return p;
}

void Polynomial::add_term(double coeff, std::vector<int> powers) {
    if (powers.size() != num_vars_) {
        throw ConfigError("polynomial term has " + std::to_string(powers.size()) +
                          " exponents, expected " + std::to_string(num_vars_));
    }
    if (std::any_of(powers.begin(), powers.end(), [](int e) { return e < 0; })) {
        throw ConfigError("polynomial exponents must be nonnegative");
    }
    for (auto& term : terms_) {
        if (term.powers == powers) {
            term.coeff += coeff;
            return;
        }
    }
    terms_.push_back({coeff, std::move(powers)});
}

double Polynomial::evaluate(std::span<const double> vars) const {
    double total = 0.0;
    for (const auto& term : terms_) {
        double value = term.coeff;
        for (std::size_t v = 0; v < num_vars_; ++v) {
            for (int e = 0; e < term.powers[v]; ++e) {
                value *= vars[v];
            }
        }
        total += value;
    }
    return total;
}

Polynomial Polynomial::derivative(std::size_t var) const {
    Polynomial out(num_vars_);
    for (const auto& term : terms_) {
        const int e = term.powers.at(var);
        if (e == 0 || term.coeff == 0.0) {
            continue;
        }
        auto powers = term.powers;
        powers[var] = e - 1;
        out.add_term(term.coeff * e, std::move(powers));
    }
    return out;
}

bool Polynomial::is_zero() const {
    return std::all_of(terms_.begin(), terms_.end(), [](const Term& t) { return t.coeff == 0.0; });
}

bool Polynomial::depends_on(std::size_t var) const {
    return std::any_of(terms_.begin(), terms_.end(),
                       [var](const Term& t) { return t.coeff != 0.0 && t.powers.at(var) > 0; });
}

int Polynomial::degree() const {
    int deg = 0;
    for (const auto& term : terms_) {
        if (term.coeff == 0.0) {
            continue;
        }
        int d = 0;
        for (int e : term.powers) {
            d += e;
        }
        deg = std::max(deg, d);
    }
    return deg;
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
    if (other.num_vars_ != num_vars_) {
        throw ConfigError("polynomial variable count mismatch");
    }
    for (const auto& term : other.terms_) {
        add_term(term.coeff, term.powers);
    }
    return *this;
}

Polynomial& Polynomial::operator*=(double s) {
    for (auto& term : terms_) {
        term.coeff *= s;
    }
    return *this;
}

Polynomial operator*(const Polynomial& lhs, const Polynomial& rhs) {
    if (lhs.num_vars_ != rhs.num_vars_) {
        throw ConfigError("polynomial variable count mismatch");
    }
    Polynomial out(lhs.num_vars_);
    for (const auto& a : lhs.terms_) {
        for (const auto& b : rhs.terms_) {
            std::vector<int> powers(lhs.num_vars_);
            for (std::size_t v = 0; v < powers.size(); ++v) {
                powers[v] = a.powers[v] + b.powers[v];
            }
            out.add_term(a.coeff * b.coeff, std::move(powers));
        }
    }
    return out;
}

bool operator==(const Polynomial& lhs, const Polynomial& rhs) {
    if (lhs.num_vars_ != rhs.num_vars_ || lhs.terms_.size() != rhs.terms_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < lhs.terms_.size(); ++i) {
        if (lhs.terms_[i].coeff != rhs.terms_[i].coeff ||
            lhs.terms_[i].powers != rhs.terms_[i].powers) {
            return false;
        }
    }
    return true;
}

}  // namespace stochpmp
