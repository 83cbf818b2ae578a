#pragma once

// Deterministic surjective enumeration g_1, g_2, ... of a scheme's group.
//
// height(g) = max(1 + largest supported coordinate, largest value height),
// where a value's height is |v| on Z, |symmetric representative| on Z/m and
// p+q for p/q on Q/Z. Level h lists the elements of height exactly h, sorted
// by support size, then the tuple of supported coordinates, then the tuple of
// values (each coordinate's values ordered by height, positive before
// negative). g_1 = 0 is level 0. Every level is finite, so the enumeration
// reaches each element.

#include "invnorm/group.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace invnorm {

namespace detail {

struct GradedValue {
    Rational value;
    Integer height;
};

/// Nonzero values of the coordinate kind with height <= h, in enumeration order.
inline std::vector<GradedValue> values_up_to(const CoordKind& k, unsigned long h) {
    std::vector<GradedValue> out;
    switch (k.type) {
    case CoordType::Integer:
        for (unsigned long v = 1; v <= h; ++v) {
            out.push_back({Rational(v), Integer(v)});
            out.push_back({Rational(-static_cast<long>(v)), Integer(v)});
        }
        break;
    case CoordType::Cyclic:
        for (unsigned long v = 1; v <= h && Integer(2 * v) <= k.modulus; ++v) {
            out.push_back({Rational(v), Integer(v)});
            if (Integer(2 * v) != k.modulus)
                out.push_back({Rational(Integer(k.modulus - v)), Integer(v)});
        }
        break;
    case CoordType::RationalModOne:
        for (unsigned long ht = 3; ht <= h; ++ht)
            for (unsigned long p = 1; 2 * p < ht; ++p) {
                const unsigned long q = ht - p;
                if (std::gcd(p, q) == 1)
                    out.push_back({Rational(p, q), Integer(ht)});
            }
        break;
    }
    return out;
}

} // namespace detail

class GroupEnumerator {
public:
    explicit GroupEnumerator(GroupScheme scheme) : scheme_(std::move(scheme)) {
        cache_.emplace_back(); // g_1 = 0
        if (scheme_.is_finite_group()) {
            unsigned long cap = static_cast<unsigned long>(*scheme_.num_coords());
            for (std::size_t i = 0; i < *scheme_.num_coords(); ++i) {
                const Integer half = scheme_.kind(i).modulus / 2;
                cap = std::max(cap, half.get_ui());
            }
            max_level_ = cap;
        }
    }

    /// g_n for n >= 1; nullopt past the end of a finite group.
    std::optional<GroupElement> at(std::size_t n) {
        if (n == 0)
            throw std::invalid_argument("enumeration index starts at 1");
        while (cache_.size() < n) {
            if (!advance())
                return std::nullopt;
        }
        return cache_[n - 1];
    }

    const GroupScheme& scheme() const { return scheme_; }

private:
    // Odometer over (support size t, coordinate combination, value tuple).
    bool start_level() {
        for (;;) {
            ++level_;
            if (max_level_ && level_ > *max_level_)
                return false;
            avail_ = level_;
            if (auto nc = scheme_.num_coords())
                avail_ = std::min<std::size_t>(avail_, *nc);
            lists_.clear();
            for (std::size_t i = 0; i < avail_; ++i)
                lists_.push_back(detail::values_up_to(scheme_.kind(i), level_));
            t_ = 0;
            if (next_support())
                return true;
        }
    }

    // Moves to the next combination with nonempty value lists; resets values.
    bool next_support() {
        for (;;) {
            if (t_ == 0 || !next_combo()) {
                ++t_;
                if (t_ > avail_)
                    return false;
                combo_.resize(t_);
                for (std::size_t i = 0; i < t_; ++i)
                    combo_[i] = i;
            }
            bool ok = true;
            for (std::size_t c : combo_)
                if (lists_[c].empty())
                    ok = false;
            if (ok) {
                vals_.assign(t_, 0);
                fresh_ = true;
                return true;
            }
        }
    }

    bool next_combo() {
        std::size_t i = t_;
        while (i > 0) {
            --i;
            if (combo_[i] < avail_ - t_ + i) {
                ++combo_[i];
                for (std::size_t j = i + 1; j < t_; ++j)
                    combo_[j] = combo_[j - 1] + 1;
                return true;
            }
        }
        return false;
    }

    bool next_values() {
        std::size_t i = t_;
        while (i > 0) {
            --i;
            if (vals_[i] + 1 < lists_[combo_[i]].size()) {
                ++vals_[i];
                for (std::size_t j = i + 1; j < t_; ++j)
                    vals_[j] = 0;
                return true;
            }
        }
        return false;
    }

    bool qualifies() const {
        if (combo_.back() + 1 == level_)
            return true;
        for (std::size_t i = 0; i < t_; ++i)
            if (lists_[combo_[i]][vals_[i]].height == level_)
                return true;
        return false;
    }

    bool advance() {
        for (;;) {
            if (level_ == 0 || t_ == 0 || t_ > avail_) {
                if (!start_level())
                    return false;
                fresh_ = false;
            } else if (fresh_) {
                fresh_ = false;
            } else if (!next_values()) {
                if (!next_support()) {
                    t_ = 0;
                    continue;
                }
                fresh_ = false;
            }
            if (qualifies()) {
                std::vector<GroupElement::Entry> entries;
                entries.reserve(t_);
                for (std::size_t i = 0; i < t_; ++i)
                    entries.emplace_back(combo_[i], lists_[combo_[i]][vals_[i]].value);
                cache_.push_back(GroupElement::from_canonical(std::move(entries)));
                return true;
            }
        }
    }

    GroupScheme scheme_;
    std::vector<GroupElement> cache_;
    std::optional<unsigned long> max_level_;
    unsigned long level_ = 0;
    std::size_t avail_ = 0;
    std::size_t t_ = 0;
    bool fresh_ = false;
    std::vector<std::vector<detail::GradedValue>> lists_;
    std::vector<std::size_t> combo_;
    std::vector<std::size_t> vals_;
};

/// g_n of the fixed enumeration (n >= 1); nullopt past the end of a finite group.
inline std::optional<GroupElement> enumerate_group(const GroupScheme& s, std::size_t n) {
    GroupEnumerator e(s);
    return e.at(n);
}

/// Height of an element in the enumeration's grading.
inline Integer element_height(const GroupScheme& s, const GroupElement& g) {
    Integer h = 0;
    for (const auto& [c, v] : g.entries()) {
        h = std::max(h, Integer(c + 1));
        const CoordKind k = s.kind(c);
        Integer vh;
        switch (k.type) {
        case CoordType::Integer:
            vh = abs(v.get_num());
            break;
        case CoordType::Cyclic: {
            const Integer r = v.get_num();
            vh = (2 * r <= k.modulus) ? r : Integer(k.modulus - r);
            break;
        }
        case CoordType::RationalModOne:
            vh = v.get_num() + v.get_den();
            break;
        }
        h = std::max(h, vh);
    }
    return h;
}

} // namespace invnorm
