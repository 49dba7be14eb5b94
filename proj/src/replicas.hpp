#pragma once

#include <exception>
#include <vector>

#include "capmc/dyadic.hpp"
#include "capmc/experiments.hpp"

namespace capmc::detail {

/// Runs fn(r) for r = 0..replicas-1, possibly concurrently, and concatenates the rows in
/// replica order. The first exception (by replica) is rethrown after the loop.
template <class Fn>
std::vector<ExperimentRecord> over_replicas(int replicas, Fn&& fn) {
    std::vector<std::vector<ExperimentRecord>> rows(static_cast<std::size_t>(replicas));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(replicas));
#pragma omp parallel for schedule(dynamic, 1)
    for (int r = 0; r < replicas; ++r) {
        try {
            rows[static_cast<std::size_t>(r)] = fn(r);
        } catch (...) {
            errors[static_cast<std::size_t>(r)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<ExperimentRecord> out;
    for (auto& v : rows) out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    return out;
}

inline ExperimentRecord aborted_row(const char* experiment, int replica, std::uint64_t seed, const BoxEscape& e) {
    ExperimentRecord rec;
    rec.experiment = experiment;
    rec.replica = replica;
    rec.quantity = kAbortedQuantity;
    rec.scale_kind = "atom";
    rec.scale = static_cast<double>(e.atom());
    rec.estimate = 1.0;
    rec.seed = seed;
    return rec;
}

inline bool is_aborted(const ExperimentRecord& r) { return r.quantity == kAbortedQuantity; }

}  // namespace capmc::detail
