#pragma once

// Elements of a GroupScheme and the abelian group law on them.
//
// An element is a finitely supported coordinate vector stored sparsely in
// canonical form: coordinates ascending, no zero entries, Z/m residues in
// [0, m), Q/Z values in [0, 1) in lowest terms.

#include "invnorm/rational.hpp"
#include "invnorm/scheme.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace invnorm {

class SchemeMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class GroupElement {
public:
    using Entry = std::pair<std::size_t, Rational>;

    GroupElement() = default;

    /// Entries must already be canonical; use canonical_element() otherwise.
    static GroupElement from_canonical(std::vector<Entry> entries) {
        GroupElement e;
        e.entries_ = std::move(entries);
        return e;
    }

    const std::vector<Entry>& entries() const { return entries_; }
    bool is_zero() const { return entries_.empty(); }
    std::size_t support_size() const { return entries_.size(); }

    /// Value at coordinate i (0 when unsupported).
    Rational at(std::size_t i) const {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), i,
                                   [](const Entry& e, std::size_t c) { return e.first < c; });
        if (it != entries_.end() && it->first == i)
            return it->second;
        return Rational(0);
    }

    std::optional<std::size_t> max_coord() const {
        if (entries_.empty())
            return std::nullopt;
        return entries_.back().first;
    }

    friend bool operator==(const GroupElement& a, const GroupElement& b) { return a.entries_ == b.entries_; }

    friend bool operator<(const GroupElement& a, const GroupElement& b) {
        const std::size_t n = std::min(a.entries_.size(), b.entries_.size());
        for (std::size_t i = 0; i < n; ++i) {
            const auto& x = a.entries_[i];
            const auto& y = b.entries_[i];
            if (x.first != y.first)
                return x.first < y.first;
            const int c = cmp(x.second, y.second);
            if (c != 0)
                return c < 0;
        }
        return a.entries_.size() < b.entries_.size();
    }
    friend bool operator>(const GroupElement& a, const GroupElement& b) { return b < a; }
    friend bool operator<=(const GroupElement& a, const GroupElement& b) { return !(b < a); }
    friend bool operator>=(const GroupElement& a, const GroupElement& b) { return !(a < b); }

    std::size_t hash() const {
        std::size_t h = 0xcbf29ce484222325ULL;
        for (const auto& [c, v] : entries_) {
            h = (h ^ c) * 0x100000001b3ULL;
            h = (h ^ hash_value(v)) * 0x100000001b3ULL;
        }
        return h;
    }

private:
    std::vector<Entry> entries_;
};

struct ElementHash {
    std::size_t operator()(const GroupElement& e) const noexcept { return e.hash(); }
};

namespace detail {

inline void reduce_with(const CoordKind& k, Rational& v) {
    switch (k.type) {
    case CoordType::Integer:
        return;
    case CoordType::Cyclic: {
        Integer r;
        mpz_fdiv_r(r.get_mpz_t(), v.get_num_mpz_t(), k.modulus.get_mpz_t());
        v = r;
        return;
    }
    case CoordType::RationalModOne: {
        if (v >= 0 && v < 1)
            return;
        v -= floor(v);
        return;
    }
    }
}

inline void reduce(const GroupScheme& s, std::size_t i, Rational& v) {
    if (const CoordKind* k = s.stored_kind(i))
        reduce_with(*k, v);
    else
        reduce_with(s.kind(i), v);
}

} // namespace detail

/// Does the element's raw data fit the scheme (coordinates exist, values of
/// the right shape, canonical)?
inline bool conforms(const GroupScheme& s, const GroupElement& e) {
    std::optional<std::size_t> prev;
    for (const auto& [c, v] : e.entries()) {
        if (prev && c <= *prev)
            return false;
        prev = c;
        if (!s.has_coord(c) || v == 0)
            return false;
        const CoordKind k = s.kind(c);
        switch (k.type) {
        case CoordType::Integer:
            if (v.get_den() != 1)
                return false;
            break;
        case CoordType::Cyclic:
            if (v.get_den() != 1 || v < 0 || v >= k.modulus)
                return false;
            break;
        case CoordType::RationalModOne:
            if (v < 0 || v >= 1)
                return false;
            break;
        }
    }
    return true;
}

/// Canonicalizes arbitrary (coord, value) data; rejects values that do not
/// belong to the coordinate's kind.
inline GroupElement canonical_element(const GroupScheme& s, std::vector<GroupElement::Entry> raw) {
    std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<GroupElement::Entry> out;
    for (auto& [c, v] : raw) {
        if (!s.has_coord(c))
            throw SchemeMismatch("coordinate " + std::to_string(c) + " not in scheme " + s.to_string());
        v.canonicalize();
        const CoordKind k = s.kind(c);
        if (k.type != CoordType::RationalModOne && v.get_den() != 1)
            throw SchemeMismatch("non-integer value " + to_string(v) + " on coordinate " + std::to_string(c) + " (" +
                                 k.to_string() + ")");
        if (!out.empty() && out.back().first == c)
            out.back().second += v;
        else
            out.emplace_back(c, v);
    }
    std::vector<GroupElement::Entry> clean;
    for (auto& [c, v] : out) {
        detail::reduce(s, c, v);
        if (v != 0)
            clean.emplace_back(c, std::move(v));
    }
    return GroupElement::from_canonical(std::move(clean));
}

inline GroupElement add(const GroupScheme& s, const GroupElement& a, const GroupElement& b) {
    const auto& x = a.entries();
    const auto& y = b.entries();
    std::vector<GroupElement::Entry> out;
    out.reserve(x.size() + y.size());
    std::size_t i = 0, j = 0;
    while (i < x.size() || j < y.size()) {
        if (j == y.size() || (i < x.size() && x[i].first < y[j].first)) {
            out.push_back(x[i++]);
        } else if (i == x.size() || y[j].first < x[i].first) {
            out.push_back(y[j++]);
        } else {
            Rational v = x[i].second + y[j].second;
            detail::reduce(s, x[i].first, v);
            if (v != 0)
                out.emplace_back(x[i].first, std::move(v));
            ++i;
            ++j;
        }
    }
    return GroupElement::from_canonical(std::move(out));
}

inline GroupElement neg(const GroupScheme& s, const GroupElement& a) {
    std::vector<GroupElement::Entry> out;
    out.reserve(a.entries().size());
    for (const auto& [c, v] : a.entries()) {
        Rational w = -v;
        detail::reduce(s, c, w);
        if (w != 0)
            out.emplace_back(c, std::move(w));
    }
    return GroupElement::from_canonical(std::move(out));
}

inline GroupElement sub(const GroupScheme& s, const GroupElement& a, const GroupElement& b) {
    return add(s, a, neg(s, b));
}

inline GroupElement scalar_mul(const GroupScheme& s, const Integer& n, const GroupElement& a) {
    std::vector<GroupElement::Entry> out;
    if (n == 0)
        return GroupElement();
    for (const auto& [c, v] : a.entries()) {
        Rational w = v * n;
        detail::reduce(s, c, w);
        if (w != 0)
            out.emplace_back(c, std::move(w));
    }
    return GroupElement::from_canonical(std::move(out));
}

inline GroupElement scalar_mul(const GroupScheme& s, long n, const GroupElement& a) {
    return scalar_mul(s, Integer(n), a);
}

enum class ArithOp { Add, Neg, ScalarMul };

/// Checked entry point: operands must conform to the scheme.
inline GroupElement group_arith(const GroupScheme& s, ArithOp op, const GroupElement& a,
                                const GroupElement& b = GroupElement(), const Integer& n = 0) {
    if (!conforms(s, a) || !conforms(s, b))
        throw SchemeMismatch("operand does not belong to scheme " + s.to_string());
    switch (op) {
    case ArithOp::Add:
        return add(s, a, b);
    case ArithOp::Neg:
        return neg(s, a);
    case ArithOp::ScalarMul:
        return scalar_mul(s, n, a);
    }
    throw std::logic_error("bad op");
}

/// Order of the element: least n >= 1 with n*g = 0, or nullopt for infinite.
inline std::optional<Integer> order(const GroupScheme& s, const GroupElement& g) {
    Integer acc = 1;
    for (const auto& [c, v] : g.entries()) {
        const CoordKind k = s.kind(c);
        Integer o;
        switch (k.type) {
        case CoordType::Integer:
            return std::nullopt;
        case CoordType::Cyclic: {
            Integer gg;
            mpz_gcd(gg.get_mpz_t(), v.get_num_mpz_t(), k.modulus.get_mpz_t());
            o = k.modulus / gg;
            break;
        }
        case CoordType::RationalModOne:
            o = v.get_den();
            break;
        }
        mpz_lcm(acc.get_mpz_t(), acc.get_mpz_t(), o.get_mpz_t());
    }
    return acc;
}

/// Order of the value v on coordinate c, nullopt on an integer coordinate.
inline std::optional<Integer> coord_order(const GroupScheme& s, std::size_t c, const Rational& v) {
    if (s.kind(c).type == CoordType::Integer)
        return std::nullopt;
    if (v == 0)
        return Integer(1);
    return order(s, GroupElement::from_canonical({{c, v}}));
}

/// Order of the projection of <A> onto the torsion coordinate c.
inline Integer projection_order(const GroupScheme& s, std::size_t c, const std::vector<GroupElement>& a) {
    Integer acc = 1;
    for (const auto& x : a) {
        const Integer o = *coord_order(s, c, x.at(c));
        mpz_lcm(acc.get_mpz_t(), acc.get_mpz_t(), o.get_mpz_t());
    }
    return acc;
}

/// Generator d_n (n >= 1) of the scheme's enumerated generating set.
inline std::optional<GroupElement> generator(const GroupScheme& s, std::size_t n) {
    auto pos = s.generator_position(n);
    if (!pos)
        return std::nullopt;
    const auto [coord, level] = *pos;
    Rational v(1);
    if (s.kind(coord).type == CoordType::RationalModOne)
        v = Rational(1, static_cast<unsigned long>(level + 2));
    return GroupElement::from_canonical({{coord, v}});
}

// ---------------------------------------------------------------------------
// Text and JSON forms.
//
// Text: "0" for the identity, otherwise "c<i>=<v>;c<j>=<w>" in coordinate
// order. Schemes with a single coordinate print just the value ("-3", "1/2").
// The parser also accepts dense tuples "(v0,v1,...)" and bare values (placed
// on coordinate 0).

inline std::string format_element(const GroupScheme& s, const GroupElement& e) {
    if (e.is_zero())
        return "0";
    if (s.num_coords() == std::size_t{1})
        return to_string(e.entries().front().second);
    std::string out;
    for (const auto& [c, v] : e.entries()) {
        if (!out.empty())
            out += ';';
        out += 'c' + std::to_string(c) + '=' + to_string(v);
    }
    return out;
}

/// Scheme-free debug form "c0=3;c2=1/2".
inline std::ostream& operator<<(std::ostream& os, const GroupElement& e) {
    if (e.is_zero())
        return os << '0';
    bool first = true;
    for (const auto& [c, v] : e.entries()) {
        os << (first ? "" : ";") << 'c' << c << '=' << to_string(v);
        first = false;
    }
    return os;
}

inline GroupElement parse_element(const GroupScheme& s, std::string_view text) {
    std::string t;
    for (char ch : text)
        if (!std::isspace(static_cast<unsigned char>(ch)))
            t.push_back(ch);
    if (t.empty())
        throw ParseError("empty element literal");
    std::vector<GroupElement::Entry> raw;
    if (t.front() == '(') {
        if (t.back() != ')')
            throw ParseError("unterminated tuple '" + t + "'");
        std::string body = t.substr(1, t.size() - 2);
        std::size_t coord = 0, start = 0;
        while (start <= body.size()) {
            std::size_t comma = body.find(',', start);
            if (comma == std::string::npos)
                comma = body.size();
            raw.emplace_back(coord++, parse_rational(body.substr(start, comma - start)));
            start = comma + 1;
        }
    } else if (t.find('=') != std::string::npos) {
        std::size_t start = 0;
        while (start < t.size()) {
            std::size_t semi = t.find(';', start);
            if (semi == std::string::npos)
                semi = t.size();
            const std::string item = t.substr(start, semi - start);
            const auto eq = item.find('=');
            if (item.size() < 3 || item.front() != 'c' || eq == std::string::npos)
                throw ParseError("bad sparse entry '" + item + "'");
            const std::string idx = item.substr(1, eq - 1);
            if (idx.empty() || !std::all_of(idx.begin(), idx.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); }))
                throw ParseError("bad coordinate index in '" + item + "'");
            raw.emplace_back(std::stoul(idx), parse_rational(item.substr(eq + 1)));
            start = semi + 1;
        }
    } else {
        raw.emplace_back(0, parse_rational(t));
    }
    return canonical_element(s, std::move(raw));
}

inline nlohmann::json element_to_json(const GroupElement& e) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [c, v] : e.entries()) {
        nlohmann::json entry;
        entry["coord"] = c;
        if (v.get_den() == 1 && v.get_num().fits_slong_p())
            entry["val"] = v.get_num().get_si();
        else
            entry["val"] = to_string(v);
        arr.push_back(std::move(entry));
    }
    return arr;
}

inline GroupElement element_from_json(const GroupScheme& s, const nlohmann::json& j) {
    if (!j.is_array())
        throw ParseError("element JSON must be an array of {coord, val}");
    std::vector<GroupElement::Entry> raw;
    for (const auto& entry : j) {
        if (!entry.is_object() || !entry.contains("coord") || !entry.contains("val"))
            throw ParseError("element entry must have 'coord' and 'val'");
        const auto& val = entry["val"];
        Rational v;
        if (val.is_number_integer())
            v = Rational(Integer(std::to_string(val.get<long long>()), 10));
        else if (val.is_string())
            v = parse_rational(val.get<std::string>());
        else
            throw ParseError("element 'val' must be an integer or a \"p/q\" string");
        raw.emplace_back(entry["coord"].get<std::size_t>(), std::move(v));
    }
    return canonical_element(s, std::move(raw));
}

} // namespace invnorm

template <>
struct std::hash<invnorm::GroupElement> {
    std::size_t operator()(const invnorm::GroupElement& e) const noexcept { return e.hash(); }
};
