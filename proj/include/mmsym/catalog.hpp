#pragma once

#include "mmsym/core.hpp"

#include <map>
#include <string>
#include <vector>

namespace mmsym {

struct OrbitSpec {
    RankOneTriple<Rational> seed;
    std::vector<GroupElement> elements;
};

// [apply_element(e, seed) for e in elements], in order.
std::vector<RankOneTriple<Rational>> expand_orbit(const OrbitSpec& spec);

// Orbit of `seed` under the group generated by `gens`, breadth-first from the seed,
// one representative per rank-one tensor.
std::vector<RankOneTriple<Rational>> generated_orbit(const RankOneTriple<Rational>& seed,
                                                     const std::vector<GroupElement>& gens);

// Decomposition files (JSON). Exact files hold integers or "p/q" strings; float files
// hold JSON numbers, or 16-digit hex strings of the IEEE-754 bits when
// "encoding" is "hexbits".
ScalarMode file_mode(const std::string& text);

ExactDecomposition parse_exact(const std::string& text);
FloatDecomposition parse_float(const std::string& text);
std::string serialize(const ExactDecomposition& dec);
std::string serialize(const FloatDecomposition& dec, bool hexbits = false);

ExactDecomposition load(const std::string& path);
FloatDecomposition load_float(const std::string& path);
void save(const ExactDecomposition& dec, const std::string& path);
void save(const FloatDecomposition& dec, const std::string& path, bool hexbits = false);

// Named elements used by catalog files: id, pi, tr and any "elements" entries.
// Words are space-separated factors "name" or "name^k"; the rightmost acts first.
GroupElement parse_word(const std::string& word, const std::map<std::string, GroupElement>& named);
std::map<std::string, GroupElement> builtin_elements(int n);

// Built-in decompositions. The seven primary keys plus the two explicit
// expansions "z4z3_explicit" and "lader_z3_explicit".
const std::vector<std::string>& builtin_names();
const std::vector<std::string>& builtin_fixture_names();
ExactDecomposition builtin(const std::string& name);
// The raw file text, honouring MMSYM_CATALOG_DIR when set.
std::string builtin_text(const std::string& name);

// Named group elements for the CLI: a0conj, pi, tr, phi, zeta, laderman_exchange.
GroupElement named_element(const std::string& name);
const std::vector<std::string>& named_element_names();

// "builtin:NAME" or a file path.
ExactDecomposition load_source(const std::string& src);

// Group element files: {"g":..., "h":..., "k":..., "cyclic":c, "transpose":b} or
// {"word": "...", "elements": {...}}.
GroupElement parse_element(const std::string& text, int n);

}  // namespace mmsym
