#include "mmsym/catalog.hpp"

#include "catalog_data.hpp"
#include "mmsym/symmetry.hpp"

#include <json.hpp>

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mmsym {

using nlohmann::json;

namespace {

constexpr const char* format_tag = "mmsym-decomposition";

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out) throw Error("write failed: " + path);
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        size_t line = 1;
        for (size_t i = 0; i < e.byte && i < text.size(); ++i)
            if (text[i] == '\n') ++line;
        throw ParseError("line " + std::to_string(line), e.what());
    }
}

template <class S>
struct EntryReader;

template <>
struct EntryReader<Rational> {
    static Rational read(const json& v, const std::string& where) {
        if (v.is_number_integer()) {
            return v.is_number_unsigned() ? Rational(Integer(std::to_string(v.get<std::uint64_t>())))
                                          : Rational(Integer(std::to_string(v.get<std::int64_t>())));
        }
        if (v.is_string()) {
            try {
                return parse_rational(v.get<std::string>());
            } catch (const ParseError& e) {
                throw ParseError(where, e.what());
            }
        }
        if (v.is_number_float()) throw ParseError(where, "floating-point entry in exact file; write it as \"p/q\"");
        throw ParseError(where, "entry must be an integer or a \"p/q\" string");
    }
};

template <>
struct EntryReader<double> {
    static double read(const json& v, const std::string& where) {
        double d;
        if (v.is_number()) {
            d = v.get<double>();
        } else if (v.is_string()) {
            const auto s = v.get<std::string>();
            if (s.size() == 18 && s.rfind("0x", 0) == 0) {
                char* end = nullptr;
                std::uint64_t bits = std::strtoull(s.c_str() + 2, &end, 16);
                if (*end != '\0') throw ParseError(where, "invalid hex float \"" + s + "\"");
                d = std::bit_cast<double>(bits);
            } else {
                try {
                    d = parse_rational(s).get_d();
                } catch (const ParseError& e) {
                    throw ParseError(where, e.what());
                }
            }
        } else {
            throw ParseError(where, "entry must be a number");
        }
        if (!std::isfinite(d)) throw ParseError(where, "non-finite entry");
        return d;
    }
};

template <class S>
Mat<S> read_matrix(const json& v, int n, const std::string& where) {
    if (!v.is_array() || static_cast<int>(v.size()) != n)
        throw ParseError(where, "expected " + std::to_string(n) + " rows");
    Mat<S> m(n);
    for (int i = 0; i < n; ++i) {
        const auto& row = v[i];
        if (!row.is_array() || static_cast<int>(row.size()) != n)
            throw ParseError(where + "[" + std::to_string(i) + "]", "expected " + std::to_string(n) + " entries");
        for (int j = 0; j < n; ++j)
            m(i, j) = EntryReader<S>::read(row[j], where + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
    }
    return m;
}

template <class S>
RankOneTriple<S> read_triple(const json& v, int n, const std::string& where) {
    if (!v.is_object()) throw ParseError(where, "term must be an object with x, y, z");
    RankOneTriple<S> t;
    for (const char* slot : {"x", "y", "z"})
        if (!v.contains(slot)) throw ParseError(where, std::string("missing ") + slot);
    t.x = read_matrix<S>(v["x"], n, where + ", x");
    t.y = read_matrix<S>(v["y"], n, where + ", y");
    t.z = read_matrix<S>(v["z"], n, where + ", z");
    if (!t.valid()) throw ParseError(where, "zero matrix in term");
    return t;
}

GroupElement read_element(const json& v, int n, const std::string& name) {
    const std::string where = name.empty() ? "element" : "element " + name;
    if (!v.is_object()) throw ParseError(where, "must be an object");
    auto mat = [&](const char* key) {
        return v.contains(key) ? read_matrix<Rational>(v[key], n, where + ", " + key) : ExactMat::identity(n);
    };
    GroupElement e{mat("g"), mat("h"), mat("k"), 0, false, name};
    if (v.contains("cyclic")) {
        if (!v["cyclic"].is_number_integer()) throw ParseError(where, "cyclic must be an integer");
        e.cyclic = ((v["cyclic"].get<int>() % 3) + 3) % 3;
    }
    if (v.contains("transpose")) {
        if (!v["transpose"].is_boolean()) throw ParseError(where, "transpose must be a boolean");
        e.transpose = v["transpose"].get<bool>();
    }
    try {
        check_invertible(e);
    } catch (const SingularError& err) {
        throw ParseError(where, err.what());
    }
    return e;
}

int read_header(const json& doc) {
    if (!doc.is_object()) throw ParseError("", "top level must be an object");
    if (!doc.contains("format") || doc["format"] != format_tag)
        throw ParseError("format", std::string("expected \"") + format_tag + "\"");
    if (!doc.contains("version") || doc["version"] != 1) throw ParseError("version", "unsupported version");
    if (!doc.contains("n") || !doc["n"].is_number_integer() || doc["n"].get<int>() < 1)
        throw ParseError("n", "must be a positive integer");
    return doc["n"].get<int>();
}

ScalarMode read_mode(const json& doc) {
    if (!doc.contains("mode")) throw ParseError("mode", "missing");
    if (doc["mode"] == "exact") return ScalarMode::exact;
    if (doc["mode"] == "float") return ScalarMode::floating;
    throw ParseError("mode", "must be \"exact\" or \"float\"");
}

std::map<std::string, GroupElement> read_elements(const json& doc, int n) {
    auto named = builtin_elements(n);
    if (doc.contains("elements")) {
        if (!doc["elements"].is_object()) throw ParseError("elements", "must be an object");
        for (const auto& [name, v] : doc["elements"].items()) named[name] = read_element(v, n, name);
    }
    return named;
}

template <class S>
Decomposition<S> read_common(const json& doc, int n) {
    Decomposition<S> d;
    d.n = n;
    if (doc.contains("name")) d.name = doc["name"].get<std::string>();
    if (doc.contains("note")) d.note = doc["note"].get<std::string>();
    auto named = read_elements(doc, n);
    if (doc.contains("generators")) {
        for (const auto& g : doc["generators"]) {
            if (!g.is_string()) throw ParseError("generators", "entries must be element names or words");
            GroupElement e = parse_word(g.get<std::string>(), named);
            e.name = g.get<std::string>();
            d.generators.push_back(std::move(e));
        }
    }
    if (doc.contains("terms")) {
        const auto& terms = doc["terms"];
        if (!terms.is_array()) throw ParseError("terms", "must be an array");
        for (size_t i = 0; i < terms.size(); ++i)
            d.terms.push_back(read_triple<S>(terms[i], n, "term " + std::to_string(i)));
    }
    return d;
}

std::string entry_text(const Rational& q) {
    if (q.get_den() == 1 && q.get_num().fits_slong_p()) return std::to_string(q.get_num().get_si());
    return "\"" + to_string(q) + "\"";
}

std::string entry_text(double v, bool hexbits) {
    if (hexbits) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "\"0x%016" PRIx64 "\"", std::bit_cast<std::uint64_t>(v));
        return buf;
    }
    return json(v).dump();
}

template <class S, class F>
std::string matrix_text(const Mat<S>& m, F&& entry) {
    std::string s = "[";
    for (int i = 0; i < m.n(); ++i) {
        s += i ? ", [" : "[";
        for (int j = 0; j < m.n(); ++j) s += (j ? ", " : "") + entry(m(i, j));
        s += "]";
    }
    return s + "]";
}

std::string element_text(const GroupElement& e) {
    auto ent = [](const Rational& q) { return entry_text(q); };
    std::string s = "{\"g\": " + matrix_text(e.g, ent) + ", \"h\": " + matrix_text(e.h, ent) +
                    ", \"k\": " + matrix_text(e.k, ent);
    if (e.cyclic) s += ", \"cyclic\": " + std::to_string(e.cyclic);
    if (e.transpose) s += ", \"transpose\": true";
    return s + "}";
}

template <class S, class F>
std::string serialize_impl(const Decomposition<S>& dec, const char* mode, F&& entry, const char* extra_header) {
    validate(dec);
    std::ostringstream os;
    os << "{\n";
    os << "  \"format\": \"" << format_tag << "\",\n";
    os << "  \"version\": 1,\n";
    os << "  \"n\": " << dec.n << ",\n";
    os << "  \"mode\": \"" << mode << "\",\n";
    os << extra_header;
    if (!dec.name.empty()) os << "  \"name\": " << json(dec.name).dump() << ",\n";
    if (!dec.note.empty()) os << "  \"note\": " << json(dec.note).dump() << ",\n";
    if (!dec.generators.empty()) {
        auto builtins = builtin_elements(dec.n);
        std::vector<std::string> names;
        std::vector<std::pair<std::string, const GroupElement*>> defs;
        for (size_t i = 0; i < dec.generators.size(); ++i) {
            const auto& g = dec.generators[i];
            std::string name = g.name.empty() ? "g" + std::to_string(i) : g.name;
            auto it = builtins.find(name);
            if (it == builtins.end() || !same_element(it->second, g)) {
                if (it != builtins.end()) name = "g" + std::to_string(i);
                bool word = name.find(' ') != std::string::npos || name.find('^') != std::string::npos;
                if (word) name = "g" + std::to_string(i);
                defs.emplace_back(name, &g);
            }
            names.push_back(name);
        }
        if (!defs.empty()) {
            os << "  \"elements\": {\n";
            for (size_t i = 0; i < defs.size(); ++i)
                os << "    " << json(defs[i].first).dump() << ": " << element_text(*defs[i].second)
                   << (i + 1 < defs.size() ? ",\n" : "\n");
            os << "  },\n";
        }
        os << "  \"generators\": " << json(names).dump() << ",\n";
    }
    os << "  \"terms\": [\n";
    for (size_t r = 0; r < dec.terms.size(); ++r) {
        const auto& t = dec.terms[r];
        os << "    {\"x\": " << matrix_text(t.x, entry) << ", \"y\": " << matrix_text(t.y, entry)
           << ", \"z\": " << matrix_text(t.z, entry) << "}" << (r + 1 < dec.terms.size() ? ",\n" : "\n");
    }
    os << "  ]\n}\n";
    return os.str();
}

}  // namespace

std::vector<RankOneTriple<Rational>> expand_orbit(const OrbitSpec& spec) {
    std::vector<RankOneTriple<Rational>> out;
    out.reserve(spec.elements.size());
    for (const auto& e : spec.elements) {
        if (e.n() != spec.seed.n()) throw DimensionError("expand_orbit: element size differs from seed");
        out.push_back(apply_element(e, spec.seed));
    }
    return out;
}

std::vector<RankOneTriple<Rational>> generated_orbit(const RankOneTriple<Rational>& seed,
                                                     const std::vector<GroupElement>& gens) {
    std::vector<RankOneTriple<Rational>> orbit{seed};
    std::map<CanonicalTriple, int> seen{{canonical(seed), 0}};
    for (size_t i = 0; i < orbit.size(); ++i)
        for (const auto& g : gens) {
            auto t = apply_element(g, orbit[i]);
            auto c = canonical(t);
            if (seen.count(c)) continue;
            seen.emplace(std::move(c), static_cast<int>(orbit.size()));
            orbit.push_back(std::move(t));
        }
    return orbit;
}

std::map<std::string, GroupElement> builtin_elements(int n) {
    return {{"id", identity_element(n)}, {"pi", cyclic_element(n, 1)}, {"tr", transpose_element(n)}};
}

GroupElement parse_word(const std::string& word, const std::map<std::string, GroupElement>& named) {
    std::istringstream in(word);
    std::string tok;
    std::optional<GroupElement> result;
    while (in >> tok) {
        std::string name = tok;
        int p = 1;
        if (auto caret = tok.find('^'); caret != std::string::npos) {
            name = tok.substr(0, caret);
            try {
                size_t used = 0;
                p = std::stoi(tok.substr(caret + 1), &used);
                if (used != tok.size() - caret - 1) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError("word \"" + word + "\"", "bad exponent in \"" + tok + "\"");
            }
        }
        auto it = named.find(name);
        if (it == named.end()) throw ParseError("word \"" + word + "\"", "unknown element \"" + name + "\"");
        GroupElement f = power(it->second, p);
        result = result ? compose(*result, f) : f;
    }
    if (!result) throw ParseError("word", "empty word");
    result->name = word;
    return *result;
}

ScalarMode file_mode(const std::string& text) {
    json doc = parse_json(text);
    read_header(doc);
    return read_mode(doc);
}

ExactDecomposition parse_exact(const std::string& text) {
    json doc = parse_json(text);
    int n = read_header(doc);
    if (read_mode(doc) != ScalarMode::exact) throw ModeError("file is in float mode; exact mode required");
    ExactDecomposition d = read_common<Rational>(doc, n);
    if (doc.contains("orbits")) {
        auto named = read_elements(doc, n);
        const auto& orbits = doc["orbits"];
        if (!orbits.is_array()) throw ParseError("orbits", "must be an array");
        for (size_t i = 0; i < orbits.size(); ++i) {
            const std::string where = "orbit " + std::to_string(i);
            const auto& o = orbits[i];
            if (!o.is_object() || !o.contains("seed")) throw ParseError(where, "missing seed");
            auto seed = read_triple<Rational>(o["seed"], n, where + " seed");
            std::vector<RankOneTriple<Rational>> terms;
            if (o.contains("elements")) {
                OrbitSpec spec{seed, {}};
                for (const auto& w : o["elements"]) {
                    if (!w.is_string()) throw ParseError(where, "elements must be words");
                    spec.elements.push_back(parse_word(w.get<std::string>(), named));
                }
                terms = expand_orbit(spec);
            } else if (o.contains("generated_by")) {
                std::vector<GroupElement> gens;
                for (const auto& w : o["generated_by"]) {
                    if (!w.is_string()) throw ParseError(where, "generated_by must list element names");
                    gens.push_back(parse_word(w.get<std::string>(), named));
                }
                terms = generated_orbit(seed, gens);
            } else {
                throw ParseError(where, "needs \"elements\" or \"generated_by\"");
            }
            for (auto& t : terms) d.terms.push_back(std::move(t));
        }
    }
    validate(d);
    return d;
}

FloatDecomposition parse_float(const std::string& text) {
    json doc = parse_json(text);
    int n = read_header(doc);
    if (read_mode(doc) == ScalarMode::exact) return to_float(parse_exact(text));
    if (doc.contains("orbits")) throw ParseError("orbits", "orbit notation is only supported in exact files");
    FloatDecomposition d = read_common<double>(doc, n);
    validate(d);
    return d;
}

std::string serialize(const ExactDecomposition& dec) {
    return serialize_impl(dec, "exact", [](const Rational& q) { return entry_text(q); }, "");
}

std::string serialize(const FloatDecomposition& dec, bool hexbits) {
    return serialize_impl(dec, "float", [hexbits](double v) { return entry_text(v, hexbits); },
                          hexbits ? "  \"encoding\": \"hexbits\",\n" : "");
}

ExactDecomposition load(const std::string& path) {
    try {
        return parse_exact(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + (e.location.empty() ? "" : ": " + e.location), e.what());
    }
}

FloatDecomposition load_float(const std::string& path) {
    try {
        return parse_float(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + (e.location.empty() ? "" : ": " + e.location), e.what());
    }
}

void save(const ExactDecomposition& dec, const std::string& path) { write_file(path, serialize(dec)); }

void save(const FloatDecomposition& dec, const std::string& path, bool hexbits) {
    write_file(path, serialize(dec, hexbits));
}

const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names{"standard3", "z4z3", "lader_z3", "twofix_z3",
                                                "addtl1",    "addtl2", "addtl3"};
    return names;
}

const std::vector<std::string>& builtin_fixture_names() {
    static const std::vector<std::string> names{"z4z3_explicit", "lader_z3_explicit"};
    return names;
}

std::string builtin_text(const std::string& name) {
    if (const char* dir = std::getenv("MMSYM_CATALOG_DIR"); dir && *dir)
        return read_file(std::string(dir) + "/" + name + ".json");
    const auto& data = embedded_catalog();
    auto it = data.find(name);
    if (it == data.end()) throw InvalidArgument("unknown builtin \"" + name + "\"");
    return it->second;
}

ExactDecomposition builtin(const std::string& name) {
    bool known = false;
    for (const auto* list : {&builtin_names(), &builtin_fixture_names()})
        for (const auto& k : *list) known = known || k == name;
    if (!known) throw InvalidArgument("unknown builtin \"" + name + "\"");
    try {
        return parse_exact(builtin_text(name));
    } catch (const ParseError& e) {
        throw ParseError("builtin:" + name + (e.location.empty() ? "" : ": " + e.location), e.what());
    }
}

namespace {

ExactMat mat3(std::initializer_list<int> v) {
    std::vector<Rational> e;
    for (int x : v) e.emplace_back(x);
    return ExactMat(3, std::move(e));
}

}  // namespace

const std::vector<std::string>& named_element_names() {
    static const std::vector<std::string> names{"id", "pi", "tr", "a0conj", "phi", "zeta", "laderman_exchange"};
    return names;
}

GroupElement named_element(const std::string& name) {
    if (name == "id") return identity_element(3);
    if (name == "pi") return cyclic_element(3, 1);
    if (name == "tr") return transpose_element(3);
    if (name == "a0conj") return conjugation_element(mat3({0, 0, -1, 1, 0, -1, 0, 1, -1}), "a0conj");
    if (name == "phi") {
        auto s = mat3({0, 0, 1, 0, -1, 0, 1, 0, 0});
        return linear_element(s, s, ExactMat::identity(3), "phi");
    }
    if (name == "zeta") {
        auto e2 = mat3({1, 0, 0, 0, -1, 0, 0, 0, 1});
        GroupElement z = linear_element(e2, e2, e2, "zeta");
        z.cyclic = 1;
        z.transpose = true;
        return z;
    }
    if (name == "laderman_exchange") {
        auto t12 = mat3({0, 1, 0, 1, 0, 0, 0, 0, 1});
        auto e2 = mat3({1, 0, 0, 0, -1, 0, 0, 0, 1});
        return linear_element(t12, ExactMat::identity(3), t12 * e2, "laderman_exchange");
    }
    throw InvalidArgument("unknown element \"" + name + "\"");
}

ExactDecomposition load_source(const std::string& src) {
    const std::string prefix = "builtin:";
    if (src.rfind(prefix, 0) == 0) return builtin(src.substr(prefix.size()));
    return load(src);
}

GroupElement parse_element(const std::string& text, int n) {
    json doc = parse_json(text);
    if (!doc.is_object()) throw ParseError("", "element file must be an object");
    if (doc.contains("word")) {
        auto named = read_elements(doc, n);
        if (!doc["word"].is_string()) throw ParseError("word", "must be a string");
        return parse_word(doc["word"].get<std::string>(), named);
    }
    std::string name = doc.contains("name") && doc["name"].is_string() ? doc["name"].get<std::string>() : "";
    return read_element(doc, n, name);
}

}  // namespace mmsym
