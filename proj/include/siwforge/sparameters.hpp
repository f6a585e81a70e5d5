#pragma once

#include "siwforge/em_core.hpp"

#include <string>
#include <vector>

namespace siwforge {

/// Frequency-indexed scattering matrices, normalized to modal wave amplitudes
/// at the port reference planes.
struct SParameterBlock {
    std::vector<double> frequencies;  // Hz, strictly increasing
    std::vector<ScatteringMatrix> matrices;
    int port_count = 0;
    std::string reference = "wave-amplitude";

    std::size_t size() const { return frequencies.size(); }
    /// Throws DomainError on inconsistent sizes or non-increasing frequencies.
    void validate() const;
    /// 1-based entry S_ij at frequency index k.
    Complex at(std::size_t k, int i, int j) const { return matrices[k](i, j); }
};

}  // namespace siwforge
