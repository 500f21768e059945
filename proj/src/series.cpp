#include "mgt/series.hpp"

#include <cmath>

namespace mgt {

Series::Series(std::size_t order, double c0) : c_(order + 1, 0.0) { c_[0] = c0; }

Series Series::variable(std::size_t order, double x0) {
    Series s(order, x0);
    if (order >= 1) s.c_[1] = 1.0;
    return s;
}

double Series::derivative(std::size_t k) const {
    double f = 1.0;
    for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
    return f * c_[k];
}

Series Series::operator+(const Series& o) const {
    Series r(*this);
    for (std::size_t k = 0; k < c_.size(); ++k) r.c_[k] += o.c_[k];
    return r;
}

Series Series::operator-(const Series& o) const {
    Series r(*this);
    for (std::size_t k = 0; k < c_.size(); ++k) r.c_[k] -= o.c_[k];
    return r;
}

Series Series::operator*(const Series& o) const {
    Series r(order());
    for (std::size_t i = 0; i < c_.size(); ++i) {
        if (c_[i] == 0.0) continue;
        for (std::size_t j = 0; i + j < c_.size(); ++j) r.c_[i + j] += c_[i] * o.c_[j];
    }
    return r;
}

Series Series::operator*(double a) const {
    Series r(*this);
    for (auto& v : r.c_) v *= a;
    return r;
}

Series Series::pow(unsigned p) const {
    Series r(order(), 1.0);
    Series base(*this);
    while (p) {
        if (p & 1u) r = r * base;
        p >>= 1u;
        if (p) base = base * base;
    }
    return r;
}

Series Series::compose(const std::vector<double>& fderivs) const {
    // f(c0 + d) = sum_k f^(k)(c0) d^k / k!, with d the non-constant part.
    Series d(*this);
    d.c_[0] = 0.0;
    Series r(order(), fderivs[0]);
    Series dk(order(), 1.0);
    double fact = 1.0;
    for (std::size_t k = 1; k <= order(); ++k) {
        dk = dk * d;
        fact *= static_cast<double>(k);
        r = r + dk * (fderivs[k] / fact);
    }
    return r;
}

Series sin(const Series& x) {
    std::vector<double> f(x.order() + 1);
    const double s = std::sin(x[0]), c = std::cos(x[0]);
    for (std::size_t k = 0; k < f.size(); ++k) {
        switch (k % 4) {
            case 0: f[k] = s; break;
            case 1: f[k] = c; break;
            case 2: f[k] = -s; break;
            default: f[k] = -c; break;
        }
    }
    return x.compose(f);
}

Series cos(const Series& x) {
    std::vector<double> f(x.order() + 1);
    const double s = std::sin(x[0]), c = std::cos(x[0]);
    for (std::size_t k = 0; k < f.size(); ++k) {
        switch (k % 4) {
            case 0: f[k] = c; break;
            case 1: f[k] = -s; break;
            case 2: f[k] = -c; break;
            default: f[k] = s; break;
        }
    }
    return x.compose(f);
}

Series exp(const Series& x) {
    std::vector<double> f(x.order() + 1, std::exp(x[0]));
    return x.compose(f);
}

}  // namespace mgt
