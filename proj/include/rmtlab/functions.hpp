#pragma once

#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rmtlab/errors.hpp"

namespace rmtlab {

/// Entire test function f: a polynomial Σ c_k x^k or exp(a·x) + c.
class TestFunction {
public:
    enum class Kind { poly, expaff };

    static TestFunction polynomial(std::vector<double> coeffs)
    {
        if (coeffs.empty()) {
            throw Error(Errc::config_error, "polynomial test function needs at least one coefficient");
        }
        TestFunction f;
        f.kind_ = Kind::poly;
        f.coeffs_ = std::move(coeffs);
        return f;
    }

    static TestFunction exp_affine(double a, double c)
    {
        TestFunction f;
        f.kind_ = Kind::expaff;
        f.a_ = a;
        f.c_ = c;
        return f;
    }

    template <class T>
    T operator()(T x) const
    {
        if (kind_ == Kind::poly) {
            T acc = T(coeffs_.back());
            for (auto it = coeffs_.rbegin() + 1; it != coeffs_.rend(); ++it) {
                acc = acc * x + T(*it);
            }
            return acc;
        }
        return std::exp(T(a_) * x) + T(c_);
    }

    bool is_constant() const noexcept
    {
        if (kind_ == Kind::expaff) return a_ == 0.0;
        for (std::size_t k = 1; k < coeffs_.size(); ++k) {
            if (coeffs_[k] != 0.0) return false;
        }
        return true;
    }

    Kind kind() const noexcept { return kind_; }

    std::string spec() const
    {
        std::ostringstream os;
        os.precision(17);
        if (kind_ == Kind::poly) {
            os << "poly:[";
            for (std::size_t k = 0; k < coeffs_.size(); ++k) os << (k ? "," : "") << coeffs_[k];
            os << "]";
        } else {
            os << "expaff:" << a_ << "," << c_;
        }
        return os.str();
    }

private:
    Kind kind_ = Kind::poly;
    std::vector<double> coeffs_{0.0, 1.0};
    double a_ = 0.0;
    double c_ = 0.0;
};

/// Smooth outer function g of the mean-norm statistic.
class OuterFunction {
public:
    enum class Kind { identity, poly2, expm1 };

    explicit OuterFunction(Kind kind = Kind::identity) : kind_(kind) {}

    double operator()(double x) const
    {
        switch (kind_) {
        case Kind::identity: return x;
        case Kind::poly2: return x + x * x;
        case Kind::expm1: return std::expm1(x);
        }
        return x;
    }

    double derivative_at_zero() const noexcept { return 1.0; }

    Kind kind() const noexcept { return kind_; }

    std::string spec() const
    {
        switch (kind_) {
        case Kind::identity: return "identity";
        case Kind::poly2: return "poly2";
        case Kind::expm1: return "expm1";
        }
        return "identity";
    }

private:
    Kind kind_;
};

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

inline std::vector<double> parse_number_list(std::string_view text)
{
    std::string body = trim(text);
    if (!body.empty() && body.front() == '[') body.erase(body.begin());
    if (!body.empty() && body.back() == ']') body.pop_back();
    std::vector<double> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string token = trim(item);
        if (token.empty()) {
            throw Error(Errc::config_error, "empty entry in number list '" + std::string(text) + "'");
        }
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size()) {
            throw Error(Errc::config_error, "not a number: '" + token + "'");
        }
        out.push_back(value);
    }
    return out;
}

} // namespace detail

/// `poly:[c0,c1,...]` or `expaff:a,c`.
inline TestFunction parse_test_function(std::string_view text)
{
    const std::string s = detail::trim(text);
    if (s.rfind("poly:", 0) == 0) {
        return TestFunction::polynomial(detail::parse_number_list(std::string_view(s).substr(5)));
    }
    if (s.rfind("expaff:", 0) == 0) {
        const auto v = detail::parse_number_list(std::string_view(s).substr(7));
        if (v.size() != 2) {
            throw Error(Errc::config_error, "expaff expects two numbers 'a,c'");
        }
        return TestFunction::exp_affine(v[0], v[1]);
    }
    throw Error(Errc::config_error, "unknown test function '" + s + "'");
}

inline OuterFunction parse_outer_function(std::string_view text)
{
    const std::string s = detail::trim(text);
    if (s == "identity") return OuterFunction(OuterFunction::Kind::identity);
    if (s == "poly2") return OuterFunction(OuterFunction::Kind::poly2);
    if (s == "expm1") return OuterFunction(OuterFunction::Kind::expm1);
    throw Error(Errc::config_error, "unknown outer function '" + s + "'");
}

struct TestFunctionPair {
    TestFunction f;
    OuterFunction g;
    double f_at_1 = 1.0;
    double g_prime_at_0 = 1.0;
};

inline TestFunctionPair make_function_pair(TestFunction f, OuterFunction g)
{
    TestFunctionPair pair{f, g, f(1.0), g.derivative_at_zero()};
    if (pair.f_at_1 == 0.0) {
        throw Error(Errc::invalid_hypothesis, "f(1) must be nonzero");
    }
    if (pair.g_prime_at_0 == 0.0) {
        throw Error(Errc::invalid_hypothesis, "g'(0) must be nonzero");
    }
    return pair;
}

/// Functions exercised by the contour and variance-integral checks.
inline std::vector<TestFunction> registry_test_functions()
{
    return {TestFunction::polynomial({0.0, 1.0}),      TestFunction::polynomial({0.0, 0.0, 1.0}),
            TestFunction::polynomial({-3.0, 2.0}),     TestFunction::polynomial({1.0, -2.0, 0.5, 0.25}),
            TestFunction::exp_affine(1.0, 0.0),        TestFunction::exp_affine(-0.5, 2.0)};
}

inline std::vector<OuterFunction> registry_outer_functions()
{
    return {OuterFunction(OuterFunction::Kind::identity), OuterFunction(OuterFunction::Kind::poly2),
            OuterFunction(OuterFunction::Kind::expm1)};
}

} // namespace rmtlab
