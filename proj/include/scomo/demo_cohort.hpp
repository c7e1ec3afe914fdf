#pragma once

// Synthetic demo cohort: normative walkers plus nine participants over the
// full 4-day protocol, written as the input files of the batch pipeline.

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "scomo/synthetic.hpp"

namespace scomo {

struct DemoOptions {
    std::filesystem::path dir;  // data/ and pipeline.cfg are written here
    std::uint64_t seed = 7;
    std::size_t participants = 9;
    std::size_t normative_walkers = 25;
};

struct DemoCohort {
    std::filesystem::path config;      // pipeline.cfg, output_dir = <dir>/out
    std::filesystem::path output_dir;
    std::size_t sessions = 0;
};

/// P01 walks symmetrically with no noise in every session; the others start
/// asymmetric and improve from session to session.
DemoCohort write_demo_cohort(const DemoOptions& options);

/// Walker settings of participant `p` (1-based) in session number `n` (1-12).
WalkerParams demo_walker(std::size_t p, int n, std::uint64_t seed);

/// Impairment level driving the walker and the selections; 0 for P01.
double demo_level(std::size_t p, int n);

}  // namespace scomo
