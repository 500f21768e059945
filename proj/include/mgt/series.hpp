#pragma once

#include <cstddef>
#include <vector>

namespace mgt {

/// Truncated univariate Taylor series c0 + c1 d + ... + cK d^K.
/// Used to pull exact derivatives out of envelopes and nonlinearities.
class Series {
public:
    explicit Series(std::size_t order = 0, double c0 = 0.0);

    /// The series of the variable itself around x0: x0 + d.
    static Series variable(std::size_t order, double x0);

    std::size_t order() const { return c_.size() - 1; }
    double operator[](std::size_t k) const { return c_[k]; }
    double& operator[](std::size_t k) { return c_[k]; }

    /// k-th derivative at the expansion point (k! * c_k).
    double derivative(std::size_t k) const;

    Series operator+(const Series& o) const;
    Series operator-(const Series& o) const;
    Series operator*(const Series& o) const;
    Series operator*(double a) const;
    Series pow(unsigned p) const;

    /// f(this) given f and its derivatives f^(k)(c0), k = 0..order.
    Series compose(const std::vector<double>& fderivs) const;

private:
    std::vector<double> c_;
};

Series sin(const Series& x);
Series cos(const Series& x);
Series exp(const Series& x);

}  // namespace mgt
