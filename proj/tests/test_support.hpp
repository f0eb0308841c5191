// Helpers shared by the test programs.
#pragma once

#include <modp/generators.hpp>

namespace testing_support {

using namespace modp;
using gen::random_chain;

inline Point P(std::initializer_list<long> xs) {
    Point p;
    for (long x : xs) p.emplace_back(x);
    return p;
}

inline Point Pr(std::initializer_list<Rational> xs) { return Point(xs); }

inline IntegerChain single(Simplex s, Coeff theta) {
    IntegerChain T(static_cast<int>(s.size()) - 1, static_cast<int>(s[0].size()));
    T.add(std::move(s), theta);
    return T;
}

}  // namespace testing_support
