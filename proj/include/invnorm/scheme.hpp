#pragma once

// Presentations of countable abelian groups as coordinate-wise direct sums
//   G = C_0 (+) C_1 (+) ...,   C_i in { Z, Z/m, Q/Z },
// given by a finite prefix followed by an optional infinite tail.
//
// Textual grammar (whitespace insignificant):
//
//   scheme := "sum" group                 -- countable direct sum of copies of group
//           | terms [ "..." ]
//   terms  := term ( "+" term )*
//   term   := base [ "^" ( N | "inf" ) ]   -- "^inf" only on the last term
//           | "sum" group                  -- only as the last term
//   group  := base | "(" terms ")"
//   base   := "Z" | "Z/" N | "QmodZ" | "Q/Z"
//
// A trailing "..." continues the listed coordinates: if the last three terms
// are cyclic with moduli in geometric progression (integer ratio >= 2) or
// arithmetic progression (difference >= 1), the progression continues;
// otherwise the whole list repeats periodically.
//
// Examples: "Z", "Z^2", "Z^inf", "sum QmodZ", "Z/2 + Z/4 + Z/8 ...".

#include "invnorm/rational.hpp"

#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace invnorm {

enum class CoordType { Integer, Cyclic, RationalModOne };

struct CoordKind {
    CoordType type = CoordType::Integer;
    Integer modulus = 0; // Cyclic only, >= 2

    static CoordKind integer() { return {CoordType::Integer, 0}; }
    static CoordKind cyclic(Integer m) {
        if (m < 2)
            throw std::invalid_argument("cyclic modulus must be >= 2");
        return {CoordType::Cyclic, std::move(m)};
    }
    static CoordKind rational_mod_one() { return {CoordType::RationalModOne, 0}; }

    bool is_torsion() const { return type != CoordType::Integer; }

    friend bool operator==(const CoordKind& a, const CoordKind& b) {
        return a.type == b.type && (a.type != CoordType::Cyclic || a.modulus == b.modulus);
    }

    std::string to_string() const {
        switch (type) {
        case CoordType::Integer:
            return "Z";
        case CoordType::Cyclic:
            return "Z/" + modulus.get_str();
        case CoordType::RationalModOne:
            return "QmodZ";
        }
        return "?";
    }
};

class GroupScheme {
public:
    enum class TailKind { None, Periodic, Geometric, Arithmetic };

    GroupScheme() : prefix_{CoordKind::integer()} {}

    static GroupScheme finite(std::vector<CoordKind> coords) {
        GroupScheme s;
        s.prefix_ = std::move(coords);
        s.tail_ = TailKind::None;
        s.period_.clear();
        return s;
    }

    static GroupScheme periodic(std::vector<CoordKind> prefix, std::vector<CoordKind> period) {
        if (period.empty())
            throw std::invalid_argument("empty period");
        GroupScheme s;
        s.prefix_ = std::move(prefix);
        s.tail_ = TailKind::Periodic;
        s.period_ = std::move(period);
        return s;
    }

    static GroupScheme parse(std::string_view text);

    const std::vector<CoordKind>& prefix() const { return prefix_; }
    const std::vector<CoordKind>& period() const { return period_; }
    TailKind tail() const { return tail_; }

    /// Number of coordinates, or nullopt for infinitely many.
    std::optional<std::size_t> num_coords() const {
        if (tail_ == TailKind::None)
            return prefix_.size();
        return std::nullopt;
    }

    bool has_coord(std::size_t i) const { return tail_ != TailKind::None || i < prefix_.size(); }

    CoordKind kind(std::size_t i) const {
        if (i < prefix_.size())
            return prefix_[i];
        const std::size_t j = i - prefix_.size();
        switch (tail_) {
        case TailKind::None:
            throw std::out_of_range("coordinate " + std::to_string(i) + " outside scheme " + to_string());
        case TailKind::Periodic:
            return period_[j % period_.size()];
        case TailKind::Geometric: {
            Integer m = prefix_.back().modulus;
            Integer r;
            mpz_pow_ui(r.get_mpz_t(), step_.get_mpz_t(), static_cast<unsigned long>(j + 1));
            return CoordKind::cyclic(m * r);
        }
        case TailKind::Arithmetic:
            return CoordKind::cyclic(prefix_.back().modulus + step_ * static_cast<unsigned long>(j + 1));
        }
        throw std::logic_error("bad tail");
    }

    /// The stored descriptor for coordinate i when it lives in the prefix or a
    /// periodic tail; nullptr for computed (progression) coordinates.
    const CoordKind* stored_kind(std::size_t i) const {
        if (i < prefix_.size())
            return &prefix_[i];
        if (tail_ == TailKind::Periodic)
            return &period_[(i - prefix_.size()) % period_.size()];
        return nullptr;
    }

    /// Some element of infinite order, or orders without bound.
    bool is_unbounded() const {
        auto unbounded_kind = [](const CoordKind& k) { return k.type != CoordType::Cyclic; };
        for (const auto& k : prefix_)
            if (unbounded_kind(k))
                return true;
        for (const auto& k : period_)
            if (unbounded_kind(k))
                return true;
        return tail_ == TailKind::Geometric || tail_ == TailKind::Arithmetic;
    }

    /// G isomorphic to a countable direct sum of copies of itself. Decided on
    /// the descriptor: a periodic tail whose period contains every prefix kind.
    bool is_infinitely_summed() const {
        if (tail_ != TailKind::Periodic)
            return false;
        for (const auto& k : prefix_) {
            bool found = false;
            for (const auto& p : period_)
                found = found || (p == k);
            if (!found)
                return false;
        }
        return true;
    }

    bool is_finite_group() const {
        if (tail_ != TailKind::None)
            return false;
        for (const auto& k : prefix_)
            if (k.type != CoordType::Cyclic)
                return false;
        return true;
    }

    // Generators. Each coordinate contributes its canonical generators:
    // 1 for Z and Z/m, and 1/2, 1/3, 1/4, ... (level k -> 1/(k+2)) for Q/Z.
    // Pairs (coord, level) are enumerated diagonally by coord+level, then coord.

    bool valid_generator(std::size_t coord, std::size_t level) const {
        if (!has_coord(coord))
            return false;
        return level == 0 || kind(coord).type == CoordType::RationalModOne;
    }

    /// (coord, level) of generator d_n, n >= 1; nullopt past the end of a
    /// finitely generated scheme.
    std::optional<std::pair<std::size_t, std::size_t>> generator_position(std::size_t n) const {
        if (n == 0)
            throw std::invalid_argument("generator indices start at 1");
        std::size_t seen = 0;
        const std::optional<std::size_t> coords = num_coords();
        for (std::size_t s = 0;; ++s) {
            for (std::size_t i = 0; i <= s; ++i) {
                if (coords && i >= *coords)
                    break;
                const std::size_t k = s - i;
                if (k > 0 && kind(i).type != CoordType::RationalModOne)
                    continue;
                if (++seen == n)
                    return std::make_pair(i, k);
            }
            if (coords) {
                bool has_qz = false;
                for (std::size_t i = 0; i < *coords; ++i)
                    has_qz = has_qz || kind(i).type == CoordType::RationalModOne;
                if (!has_qz && s >= *coords)
                    return std::nullopt;
            }
        }
    }

    /// Inverse of generator_position.
    std::size_t generator_index(std::size_t coord, std::size_t level) const {
        if (!valid_generator(coord, level))
            throw std::invalid_argument("no generator at that position");
        const std::size_t target_s = coord + level;
        const std::optional<std::size_t> coords = num_coords();
        std::size_t seen = 0;
        for (std::size_t s = 0; s <= target_s; ++s) {
            for (std::size_t i = 0; i <= s; ++i) {
                if (coords && i >= *coords)
                    break;
                const std::size_t k = s - i;
                if (k > 0 && kind(i).type != CoordType::RationalModOne)
                    continue;
                ++seen;
                if (s == target_s && i == coord)
                    return seen;
            }
        }
        throw std::logic_error("generator_index: unreachable");
    }

    std::string to_string() const {
        std::string out;
        auto join = [](const std::vector<CoordKind>& ks) {
            std::string s;
            for (std::size_t i = 0; i < ks.size(); ++i) {
                if (i)
                    s += " + ";
                s += ks[i].to_string();
            }
            return s;
        };
        switch (tail_) {
        case TailKind::None:
            return join(prefix_);
        case TailKind::Periodic:
            out = join(prefix_);
            if (!out.empty())
                out += " + ";
            if (period_.size() == 1)
                return out + "sum " + period_[0].to_string();
            return out + "sum(" + join(period_) + ")";
        case TailKind::Geometric:
        case TailKind::Arithmetic:
            return join(prefix_) + " ...";
        }
        return out;
    }

    friend bool operator==(const GroupScheme& a, const GroupScheme& b) {
        return a.to_string() == b.to_string();
    }

private:
    std::vector<CoordKind> prefix_;
    TailKind tail_ = TailKind::None;
    std::vector<CoordKind> period_;
    Integer step_ = 0; // ratio or difference for progression tails

    friend class SchemeParser;
};

class SchemeParser {
public:
    explicit SchemeParser(std::string_view text) : text_(text) {}

    GroupScheme parse() {
        GroupScheme s;
        s.prefix_.clear();
        skip();
        if (accept_word("sum")) {
            s.tail_ = GroupScheme::TailKind::Periodic;
            s.period_ = group();
            expect_end();
            return s;
        }
        std::vector<CoordKind> terms;
        while (true) {
            skip();
            if (accept_word("sum")) {
                s.tail_ = GroupScheme::TailKind::Periodic;
                s.period_ = group();
                break;
            }
            CoordKind b = base();
            skip();
            if (accept("^")) {
                skip();
                if (accept_word("inf")) {
                    s.tail_ = GroupScheme::TailKind::Periodic;
                    s.period_ = {b};
                    break;
                }
                const std::size_t n = number_size();
                if (n == 0)
                    fail("exponent must be positive");
                for (std::size_t i = 0; i < n; ++i)
                    terms.push_back(b);
            } else {
                terms.push_back(b);
            }
            skip();
            if (accept("+"))
                continue;
            break;
        }
        skip();
        if (s.tail_ == GroupScheme::TailKind::None && accept("...")) {
            continue_sequence(s, terms);
            expect_end();
            return s;
        }
        expect_end();
        if (terms.empty() && s.tail_ == GroupScheme::TailKind::None)
            fail("empty scheme");
        s.prefix_ = std::move(terms);
        return s;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& why) const {
        throw ParseError("scheme: " + why + " at offset " + std::to_string(pos_) + " in '" + std::string(text_) + "'");
    }
    void skip() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }
    bool accept(std::string_view tok) {
        if (text_.substr(pos_, tok.size()) == tok) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }
    bool accept_word(std::string_view w) {
        if (text_.substr(pos_, w.size()) != w)
            return false;
        const std::size_t end = pos_ + w.size();
        if (end < text_.size() && std::isalnum(static_cast<unsigned char>(text_[end])))
            return false;
        pos_ = end;
        return true;
    }
    void expect_end() {
        skip();
        if (pos_ != text_.size())
            fail("unexpected trailing input");
    }
    Integer number() {
        skip();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        if (start == pos_)
            fail("expected a number");
        return Integer(std::string(text_.substr(start, pos_ - start)), 10);
    }
    std::size_t number_size() {
        Integer n = number();
        if (n > 100000)
            fail("exponent too large");
        return n.get_ui();
    }
    CoordKind base() {
        skip();
        if (accept_word("QmodZ") || accept("Q/Z"))
            return CoordKind::rational_mod_one();
        if (accept("Z/")) {
            Integer m = number();
            if (m < 2)
                fail("modulus must be >= 2");
            return CoordKind::cyclic(m);
        }
        if (accept_word("Z"))
            return CoordKind::integer();
        fail("expected Z, Z/m or QmodZ");
    }
    std::vector<CoordKind> group() {
        skip();
        if (accept("(")) {
            std::vector<CoordKind> ks;
            while (true) {
                CoordKind b = base();
                skip();
                if (accept("^")) {
                    const std::size_t n = number_size();
                    for (std::size_t i = 0; i < n; ++i)
                        ks.push_back(b);
                } else {
                    ks.push_back(b);
                }
                skip();
                if (accept("+"))
                    continue;
                if (accept(")"))
                    break;
                fail("expected '+' or ')'");
            }
            return ks;
        }
        return {base()};
    }
    void continue_sequence(GroupScheme& s, std::vector<CoordKind> terms) {
        if (terms.empty())
            fail("'...' needs preceding terms");
        const std::size_t n = terms.size();
        if (n >= 3 && terms[n - 1].type == CoordType::Cyclic && terms[n - 2].type == CoordType::Cyclic &&
            terms[n - 3].type == CoordType::Cyclic) {
            const Integer& a = terms[n - 3].modulus;
            const Integer& b = terms[n - 2].modulus;
            const Integer& c = terms[n - 1].modulus;
            if (b % a == 0 && c % b == 0 && b / a == c / b && b / a >= 2) {
                s.tail_ = GroupScheme::TailKind::Geometric;
                s.step_ = b / a;
                s.prefix_ = std::move(terms);
                return;
            }
            if (b - a == c - b && b - a >= 1) {
                s.tail_ = GroupScheme::TailKind::Arithmetic;
                s.step_ = b - a;
                s.prefix_ = std::move(terms);
                return;
            }
        }
        s.tail_ = GroupScheme::TailKind::Periodic;
        s.period_ = std::move(terms);
    }
};

inline GroupScheme GroupScheme::parse(std::string_view text) { return SchemeParser(text).parse(); }

} // namespace invnorm
