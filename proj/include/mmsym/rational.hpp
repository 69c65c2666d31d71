#pragma once

#include <gmpxx.h>

#include <string>

namespace mmsym {

using Rational = mpq_class;
using Integer = mpz_class;

// Accepts "7", "-3", "2/6" (reduced on read). Rejects zero denominators and junk.
Rational parse_rational(const std::string& text);

// "p" when the denominator is 1, otherwise "p/q"; always reduced.
std::string to_string(const Rational& q);

}  // namespace mmsym
