#pragma once

#include <vector>

#include "rrmd/kernel.hpp"

namespace rrmd {

// phi(z) = h(A z + b) for one block kernel. A must conform to the block's
// sub-block structure: diagonal when the base splits per coordinate, any
// nonsingular square matrix when the base is a single sub-block.
BlockKernelPtr compose_affine_block(BlockKernelPtr base, Mat A, Vec b);

// phi(x) = alpha h(x) + beta g(x) for two block kernels on the same
// coordinate range. Gradient-monotonicity compatibility is spot-checked on
// 512 random pairs at construction; any negative inner product aborts.
BlockKernelPtr combine_conic_block(BlockKernelPtr h, BlockKernelPtr g, double alpha, double beta,
                                   std::uint64_t check_seed = 0x5eedULL);

// Whole-kernel variants. compose_affine takes a block-diagonal A conforming
// to the kernel's sub-block partition (entries outside the allowed blocks
// must be exactly zero).
Kernel compose_affine(const Kernel& h, const Mat& A, const Vec& b);
Kernel combine_conic(const Kernel& h, const Kernel& g, double alpha, double beta,
                     std::uint64_t check_seed = 0x5eedULL);

// Multi-block inflation constant:
//   sqrt(min{ 8 m, 8 e (2 + 3 ln(max_j mu_j / min_j mu_j)) })
// Nondecreasing in the mu ratio and capped by sqrt(8 m).
double gamma_constant(const std::vector<double>& mu);

}  // namespace rrmd
