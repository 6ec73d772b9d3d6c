#pragma once

#include <cstdint>
#include <vector>

#include "fan/blocks.hpp"
#include "fan/tensor.hpp"

namespace fan {

struct AffinitySpectrum {
    std::vector<double> eigenvalues; // sorted descending
    double tau = 0.0;                // relative threshold on lambda_max
    size_t significant = 0;          // count of lambda > tau * lambda_max
    size_t insignificant = 0;
};

constexpr double kDefaultSpectralTau = 0.02;

// Token affinity S = Z~^T Z~ where Z~ is Z with each token column pushed
// through a softmax over channels (the visualization normalization).
// `normalize = false` gives the raw dot-product affinity.
Tensor affinity(const Tensor& tokens, bool normalize = true);

AffinitySpectrum significant_eigencount(const Tensor& s, double tau);

// Ng-Jordan-Weiss spectral clustering of the token affinity.
std::vector<size_t> extract_clusters(const Tensor& s, size_t k, uint64_t seed = 0);

struct NoiseDecayReport {
    std::vector<double> rho;          // per block: |f_l(x+e)-f_l(x)|_F / |f_l(x)|_F
    std::vector<double> noise_response; // per block: |f_l(e)|_F / |e|_F
    std::vector<bool> zero_norm_flag; // rho reported as absolute norm
    double noise_scale = 0.0;
    uint64_t seed = 0;
};

NoiseDecayReport noise_probe(const Model& model, const std::vector<Tensor>& params,
                             const Tensor& image, double noise_scale, uint64_t seed);

// affinity spectrum of every block's output tokens; report length = depth.
// Counting uses the raw dot-product affinity (softmax token normalization is
// a visualization convention, see `affinity`). When `embed_tap` is given it
// receives the spectrum of the raw patch tokens.
std::vector<AffinitySpectrum> per_block_spectrum(const Model& model,
                                                 const std::vector<Tensor>& params,
                                                 const Tensor& image, double tau,
                                                 AffinitySpectrum* embed_tap = nullptr);

} // namespace fan
