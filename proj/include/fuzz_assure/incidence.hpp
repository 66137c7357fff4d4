#pragma once

// Campaign sufficient statistics: the number of test inputs n, the incidence
// count of every species (number of inputs exhibiting it) and the
// frequency-of-frequencies histogram f_k.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <ranges>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fuzz_assure/error.hpp"

namespace fuzz_assure {

using Count = std::uint64_t;

/// Discrete behavior identifier: a branch ("edge:4711"), a mutant ("m:132"),
/// a crash signature. Never empty.
class SpeciesId {
public:
    explicit SpeciesId(std::string token) : token_(std::move(token)) {
        if (token_.empty()) {
            throw PreconditionViolation("species id must be non-empty");
        }
    }

    const std::string& str() const noexcept { return token_; }

    friend auto operator<=>(const SpeciesId&, const SpeciesId&) = default;

private:
    std::string token_;
};

/// One test input and the set of species it exhibited.
struct IncidenceRecord {
    std::string input_id;
    std::set<SpeciesId> species;
    std::optional<Count> order;

    friend bool operator==(const IncidenceRecord&, const IncidenceRecord&) = default;
};

/// Builds a record from plain strings; duplicates collapse.
inline IncidenceRecord make_record(std::string input_id, std::initializer_list<std::string_view> species,
                                   std::optional<Count> order = std::nullopt) {
    IncidenceRecord r{std::move(input_id), {}, order};
    for (auto s : species) {
        r.species.emplace(std::string(s));
    }
    return r;
}

namespace detail {

inline Count checked_add(Count a, Count b) {
    Count out = 0;
    if (__builtin_add_overflow(a, b, &out)) {
        throw CountOverflow();
    }
    return out;
}

} // namespace detail

/// The scalar symbols the estimators consume.
struct SnapshotStats {
    Count n = 0;
    Count s_obs = 0;
    Count f1 = 0;
    Count f2 = 0;

    friend bool operator==(const SnapshotStats&, const SnapshotStats&) = default;
};

/// Single-writer accumulator over a record stream. Copies are independent
/// values and may be shared read-only across threads.
///
/// `Key` is the species key type; the public data model uses `SpeciesId`,
/// simulation and resampling paths use dense integer keys.
template <typename Key>
class BasicCampaignSnapshot {
public:
    using key_type = Key;
    using CountMap = std::map<Key, Count>;
    using Histogram = std::map<Count, Count>;

    BasicCampaignSnapshot() = default;

    /// Snapshot from already-aggregated counts. Each count must lie in [1, n].
    static BasicCampaignSnapshot from_parts(Count n, CountMap counts) {
        for (const auto& [key, c] : counts) {
            if (c == 0 || c > n) {
                throw PreconditionViolation("species incidence count must lie in [1, n]");
            }
        }
        BasicCampaignSnapshot s;
        s.n_ = n;
        s.freq_ = recount(counts);
        s.counts_ = std::move(counts);
        return s;
    }

    /// Adds one test input exhibiting `species` (each key at most once).
    template <std::ranges::input_range Range>
    void observe_species(const Range& species) {
        n_ = detail::checked_add(n_, 1);
        for (const auto& key : species) {
            auto [it, inserted] = counts_.try_emplace(Key(key), 0);
            const Count before = it->second;
            const Count after = detail::checked_add(before, 1);
            if (before > 0) {
                decrement(before);
            }
            it->second = after;
            ++freq_[after];
        }
    }

    Count n() const noexcept { return n_; }
    Count species_observed() const noexcept { return counts_.size(); }
    const CountMap& species_counts() const noexcept { return counts_; }
    /// f_k for every k with f_k > 0.
    const Histogram& frequencies() const noexcept { return freq_; }

    Count f(Count k) const {
        auto it = freq_.find(k);
        return it == freq_.end() ? 0 : it->second;
    }

    SnapshotStats stats() const { return {n_, species_observed(), f(1), f(2)}; }

    /// Combines two snapshots built from disjoint record streams.
    BasicCampaignSnapshot& merge(const BasicCampaignSnapshot& other) {
        n_ = detail::checked_add(n_, other.n_);
        for (const auto& [key, count] : other.counts_) {
            auto [it, inserted] = counts_.try_emplace(key, 0);
            it->second = detail::checked_add(it->second, count);
        }
        freq_ = recount(counts_);
        return *this;
    }

    /// Histogram recomputed from scratch from species counts.
    static Histogram recount(const CountMap& counts) {
        Histogram h;
        for (const auto& [key, c] : counts) {
            ++h[c];
        }
        return h;
    }

    friend bool operator==(const BasicCampaignSnapshot&, const BasicCampaignSnapshot&) = default;

private:
    void decrement(Count k) {
        auto it = freq_.find(k);
        if (--it->second == 0) {
            freq_.erase(it);
        }
    }

    Count n_ = 0;
    CountMap counts_;
    Histogram freq_;
};

using CampaignSnapshot = BasicCampaignSnapshot<SpeciesId>;

inline void observe_into(CampaignSnapshot& snapshot, const IncidenceRecord& record) {
    snapshot.observe_species(record.species);
}

/// Value-semantics form: returns the snapshot after one more record.
inline CampaignSnapshot observe(CampaignSnapshot snapshot, const IncidenceRecord& record) {
    observe_into(snapshot, record);
    return snapshot;
}

inline SnapshotStats snapshot_stats(const CampaignSnapshot& snapshot) { return snapshot.stats(); }

inline CampaignSnapshot merge(CampaignSnapshot a, const CampaignSnapshot& b) {
    a.merge(b);
    return a;
}

/// Batch construction over a whole record sequence.
template <std::ranges::input_range Records>
CampaignSnapshot build_snapshot(const Records& records) {
    CampaignSnapshot s;
    for (const IncidenceRecord& r : records) {
        observe_into(s, r);
    }
    return s;
}

/// Keeps only species whose id starts with `prefix` ("edge:", "crash:", ...).
/// n is unchanged: every input remains a sampling unit.
inline CampaignSnapshot filter_by_prefix(const CampaignSnapshot& snapshot, std::string_view prefix) {
    CampaignSnapshot::CountMap kept;
    for (const auto& [id, c] : snapshot.species_counts()) {
        if (id.str().starts_with(prefix)) {
            kept.emplace(id, c);
        }
    }
    return CampaignSnapshot::from_parts(snapshot.n(), std::move(kept));
}

} // namespace fuzz_assure
