#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "sitewise/core/error.hpp"
#include "sitewise/core/random.hpp"
#include "sitewise/learn/dataset.hpp"

namespace sitewise::learn {

struct SmoteEnnOptions {
    int k_smote = 5;
    int k_enn = 3;
};

struct SmoteEnnStats {
    std::array<std::size_t, kClasses> synthesized{};
    std::array<std::size_t, kClasses> removed{};
};

/// SMOTE: raises every present class to the majority count with points x + u (x_nn - x),
/// u ~ U(0, 1), x_nn one of the k_smote nearest same-class neighbours of a random class member.
inline Dataset smote(const Dataset& train, int k_smote, std::uint64_t seed, SmoteEnnStats* stats = nullptr) {
    train.validate();
    if (k_smote < 1) throw Error("smote: k_smote must be >= 1");
    auto counts = train.class_counts();
    for (int c = 0; c < kClasses; ++c)
        if (counts[c] == 1) throw Error("smote: class " + std::to_string(c) + " has fewer than 2 rows");
    const std::size_t majority = *std::max_element(counts.begin(), counts.end());

    Dataset out = train;
    Rng rng = make_rng(seed, 0x53);
    std::vector<double> point(train.n_features());
    for (int c = 0; c < kClasses; ++c) {
        if (counts[c] == 0 || counts[c] >= majority) continue;
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < train.size(); ++i)
            if (train.y[i] == c) members.push_back(i);
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_smote), members.size() - 1);
        std::vector<std::vector<std::size_t>> neighbours(members.size());
        for (std::size_t m = 0; m < members.size(); ++m)
            neighbours[m] = nearest_rows(train.x, train.x.row(members[m]), k, members[m], &members);
        const std::size_t need = majority - counts[c];
        for (std::size_t s = 0; s < need; ++s) {
            std::size_t m = static_cast<std::size_t>(uniform_index(rng, members.size()));
            std::size_t nn = neighbours[m][static_cast<std::size_t>(uniform_index(rng, neighbours[m].size()))];
            double u = uniform01(rng);
            auto base = train.x.row(members[m]);
            auto other = train.x.row(nn);
            for (std::size_t j = 0; j < point.size(); ++j) point[j] = base[j] + u * (other[j] - base[j]);
            out.add(point, c);
        }
        if (stats) stats->synthesized[static_cast<std::size_t>(c)] = need;
    }
    return out;
}

/// Edited nearest neighbours: drops a row when a strict majority of its k_enn nearest
/// neighbours carries one label different from its own. Ties keep the row.
inline Dataset edited_nearest_neighbours(const Dataset& data, int k_enn, SmoteEnnStats* stats = nullptr) {
    if (k_enn < 1) throw Error("enn: k_enn must be >= 1");
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto nn = nearest_rows(data.x, data.x.row(i), static_cast<std::size_t>(k_enn), i);
        std::array<std::size_t, kClasses> votes{};
        for (std::size_t j : nn) ++votes[static_cast<std::size_t>(data.y[j])];
        bool drop = false;
        for (int c = 0; c < kClasses; ++c)
            if (c != data.y[i] && 2 * votes[static_cast<std::size_t>(c)] > nn.size()) drop = true;
        if (drop) {
            if (stats) ++stats->removed[static_cast<std::size_t>(data.y[i])];
        } else {
            keep.push_back(i);
        }
    }
    return data.subset(keep);
}

inline Dataset smote_enn(const Dataset& train, const SmoteEnnOptions& opt, std::uint64_t seed,
                         SmoteEnnStats* stats = nullptr) {
    return edited_nearest_neighbours(smote(train, opt.k_smote, seed, stats), opt.k_enn, stats);
}

} // namespace sitewise::learn
