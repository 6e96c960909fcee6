#pragma once

// Data-parallel inner loops. Each kernel has a serial reference and an OpenMP
// version; both must produce bit-identical results.

#include <cstdint>
#include <span>
#include <vector>

namespace fourthdown {

struct GradPair {
  double g = 0.0;
  double h = 0.0;
};

/// Column-major bin codes with per-feature offsets into a flat histogram.
struct BinnedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint16_t> codes;    // codes[c * rows + r]
  std::vector<std::size_t> offsets;    // cols + 1 entries; feature c owns [offsets[c], offsets[c+1])

  std::uint16_t code(std::size_t r, std::size_t c) const { return codes[c * rows + r]; }
  std::size_t total_bins() const { return offsets.back(); }
};

/// out[offsets[c] + code(r, c)] += gh[r] over the listed rows. `out` is overwritten.
void build_histogram_serial(const BinnedMatrix& m, std::span<const std::uint32_t> rows,
                            std::span<const GradPair> gh, std::span<GradPair> out);
void build_histogram_parallel(const BinnedMatrix& m, std::span<const std::uint32_t> rows,
                              std::span<const GradPair> gh, std::span<GradPair> out);

/// parent - child, elementwise.
void subtract_histogram(std::span<const GradPair> parent, std::span<const GradPair> child,
                        std::span<GradPair> out);

int max_threads();
void set_threads(int n);

}  // namespace fourthdown
