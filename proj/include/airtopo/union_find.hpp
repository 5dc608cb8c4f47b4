#ifndef AIRTOPO_UNION_FIND_HPP
#define AIRTOPO_UNION_FIND_HPP

#include <cstdint>
#include <numeric>
#include <vector>

namespace airtopo {

// Disjoint-set forest with path halving and union by size.
class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
        std::iota(parent_.begin(), parent_.end(), std::uint32_t{0});
    }

    std::uint32_t find(std::uint32_t x) const {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    // Returns false when both elements already share a root (a union would
    // close a cycle), true when the merge happened.
    bool unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        return true;
    }

    bool connected(std::uint32_t a, std::uint32_t b) const { return find(a) == find(b); }

private:
    mutable std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> size_;
};

} // namespace airtopo

#endif // AIRTOPO_UNION_FIND_HPP
