#pragma once

#include <boost/multiprecision/cpp_int.hpp>

namespace hoare2ri {

using Int = boost::multiprecision::cpp_int;

// Euclidean division, SMT-LIB Int convention: the remainder is always
// non-negative. Division by zero is totalized to 0.
inline Int euclidDiv(const Int& a, const Int& b) {
    if (b == 0) return 0;
    Int q = a / b;  // truncating
    Int r = a - q * b;
    if (r < 0) q += (b > 0) ? -1 : 1;
    return q;
}

inline Int euclidMod(const Int& a, const Int& b) {
    if (b == 0) return 0;
    Int r = a % b;  // truncating
    if (r < 0) r += (b > 0) ? b : -b;
    return r;
}

// exp(n, k) = n^k for k >= 0, and 0 for k < 0. 0^0 = 1.
inline Int expInt(const Int& base, const Int& k) {
    if (k < 0) return 0;
    Int result = 1;
    Int b = base;
    Int e = k;
    while (e > 0) {
        if ((e & 1) != 0) result *= b;
        b *= b;
        e >>= 1;
    }
    return result;
}

}  // namespace hoare2ri
