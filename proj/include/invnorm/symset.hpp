#pragma once

// Finite symmetric subsets of a group that contain zero.

#include "invnorm/group.hpp"

#include <algorithm>
#include <iterator>
#include <stdexcept>
#include <vector>

namespace invnorm {

class SymSet {
public:
    /// The set {0}.
    SymSet() : elems_{GroupElement()} {}

    /// Smallest symmetric zero-containing set holding all of `elems`.
    static SymSet closure_of(const GroupScheme& s, const std::vector<GroupElement>& elems) {
        SymSet out;
        out.elems_.reserve(2 * elems.size() + 1);
        for (const auto& e : elems) {
            out.elems_.push_back(e);
            out.elems_.push_back(neg(s, e));
        }
        out.normalize();
        return out;
    }

    /// Throws std::invalid_argument unless `elems` is already symmetric with 0.
    static SymSet checked(const GroupScheme& s, std::vector<GroupElement> elems) {
        SymSet out;
        out.elems_ = std::move(elems);
        std::sort(out.elems_.begin(), out.elems_.end());
        out.elems_.erase(std::unique(out.elems_.begin(), out.elems_.end()), out.elems_.end());
        if (!out.contains(GroupElement()))
            throw std::invalid_argument("set does not contain 0");
        for (const auto& e : out.elems_)
            if (!out.contains(neg(s, e)))
                throw std::invalid_argument("set is not closed under negation: missing -(" + format_element(s, e) + ")");
        return out;
    }

    bool contains(const GroupElement& g) const { return std::binary_search(elems_.begin(), elems_.end(), g); }

    /// Adds g and -g.
    void insert_pm(const GroupScheme& s, const GroupElement& g) {
        insert_one(g);
        insert_one(neg(s, g));
    }

    void merge(const SymSet& other) {
        std::vector<GroupElement> out;
        out.reserve(elems_.size() + other.elems_.size());
        std::set_union(elems_.begin(), elems_.end(), other.elems_.begin(), other.elems_.end(), std::back_inserter(out));
        elems_ = std::move(out);
    }

    bool is_subset_of(const SymSet& other) const {
        return std::includes(other.elems_.begin(), other.elems_.end(), elems_.begin(), elems_.end());
    }

    const std::vector<GroupElement>& elements() const { return elems_; }
    std::size_t size() const { return elems_.size(); }
    auto begin() const { return elems_.begin(); }
    auto end() const { return elems_.end(); }

    friend bool operator==(const SymSet& a, const SymSet& b) { return a.elems_ == b.elems_; }

private:
    void insert_one(const GroupElement& g) {
        auto it = std::lower_bound(elems_.begin(), elems_.end(), g);
        if (it == elems_.end() || !(*it == g))
            elems_.insert(it, g);
    }

    void normalize() {
        elems_.emplace_back();
        std::sort(elems_.begin(), elems_.end());
        elems_.erase(std::unique(elems_.begin(), elems_.end()), elems_.end());
    }

    std::vector<GroupElement> elems_;
};

} // namespace invnorm
