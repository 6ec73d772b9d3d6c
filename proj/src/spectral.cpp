#include "fan/spectral.hpp"

#include <cmath>
#include <stdexcept>

#include "fan/linalg.hpp"
#include "fan/rng.hpp"

namespace fan {

Tensor affinity(const Tensor& tokens, bool normalize) {
    require_2d(tokens, "affinity");
    if (tokens.cols() < 2)
        throw std::invalid_argument("affinity: need at least 2 tokens");
    Tensor z = normalize ? softmax(tokens, 0) : tokens; // softmax per token column
    Tensor s = matmul(transpose(z), z);                 // n x n Gram
    // enforce exact symmetry against fp drift
    for (size_t i = 0; i < s.rows(); ++i)
        for (size_t j = i + 1; j < s.cols(); ++j) {
            double v = 0.5 * (s.at(i, j) + s.at(j, i));
            s.at(i, j) = v;
            s.at(j, i) = v;
        }
    return s;
}

AffinitySpectrum significant_eigencount(const Tensor& s, double tau) {
    require_2d(s, "significant_eigencount");
    if (s.rows() != s.cols())
        throw std::invalid_argument("significant_eigencount: matrix must be square");
    for (size_t i = 0; i < s.rows(); ++i)
        for (size_t j = i + 1; j < s.cols(); ++j)
            if (std::fabs(s.at(i, j) - s.at(j, i)) > 1e-9 * (1.0 + std::fabs(s.at(i, j))))
                throw std::invalid_argument("significant_eigencount: matrix not symmetric");
    EigenSym eig = eigen_symmetric(s);
    AffinitySpectrum spec;
    spec.eigenvalues = eig.values;
    spec.tau = tau;
    double lmax = eig.values.empty() ? 0.0 : eig.values.front();
    if (lmax <= 0.0)
        throw std::runtime_error("significant_eigencount: degenerate spectrum, lambda_max <= 0");
    for (double l : eig.values)
        if (l > tau * lmax) spec.significant++;
    spec.insignificant = eig.values.size() - spec.significant;
    return spec;
}

std::vector<size_t> extract_clusters(const Tensor& s, size_t k, uint64_t seed) {
    require_2d(s, "extract_clusters");
    const size_t n = s.rows();
    if (k < 2 || k > n)
        throw std::invalid_argument("extract_clusters: need 2 <= k <= n");

    // normalized affinity L = D^{-1/2} S D^{-1/2}
    std::vector<double> dinv(n);
    for (size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (size_t j = 0; j < n; ++j) deg += std::fabs(s.at(i, j));
        dinv[i] = (deg > 0) ? 1.0 / std::sqrt(deg) : 0.0;
    }
    Tensor l({n, n});
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) l.at(i, j) = dinv[i] * s.at(i, j) * dinv[j];

    EigenSym eig = eigen_symmetric(l);
    // rows of the top-k eigenvector matrix, row-normalized
    Tensor emb({n, k});
    for (size_t i = 0; i < n; ++i) {
        double norm = 0.0;
        for (size_t c = 0; c < k; ++c) {
            emb.at(i, c) = eig.vectors.at(i, c);
            norm += emb.at(i, c) * emb.at(i, c);
        }
        norm = std::sqrt(norm);
        if (norm > 0)
            for (size_t c = 0; c < k; ++c) emb.at(i, c) /= norm;
    }
    return kmeans(emb, k, derive_seed(seed, "spectral-kmeans")).labels;
}

NoiseDecayReport noise_probe(const Model& model, const std::vector<Tensor>& params,
                             const Tensor& image, double noise_scale, uint64_t seed) {
    NoiseDecayReport rep;
    rep.noise_scale = noise_scale;
    rep.seed = seed;

    Tensor noisy = image;
    Tensor pure(image.shape());
    Rng rng(derive_seed(seed, "noise-probe"));
    double noise_norm = 0.0;
    for (size_t i = 0; i < image.size(); ++i) {
        double e = noise_scale * rng.normal();
        noisy[i] += e;
        pure[i] = e;
        noise_norm += e * e;
    }
    noise_norm = std::sqrt(noise_norm);

    AnalysisProbe clean_p, noisy_p, pure_p;
    model.forward(params, image, &clean_p);
    model.forward(params, noisy, &noisy_p);
    model.forward(params, pure, &pure_p);

    const size_t depth = clean_p.block_outputs.size();
    for (size_t l = 0; l < depth; ++l) {
        Tensor diff = sub(noisy_p.block_outputs[l], clean_p.block_outputs[l]);
        double dnorm = frobenius_norm(diff);
        double base = frobenius_norm(clean_p.block_outputs[l]);
        if (base == 0.0) {
            rep.rho.push_back(dnorm);
            rep.zero_norm_flag.push_back(true);
        } else {
            rep.rho.push_back(dnorm / base);
            rep.zero_norm_flag.push_back(false);
        }
        double pn = frobenius_norm(pure_p.block_outputs[l]);
        rep.noise_response.push_back(noise_norm > 0 ? pn / noise_norm : 0.0);
    }
    return rep;
}

std::vector<AffinitySpectrum> per_block_spectrum(const Model& model,
                                                 const std::vector<Tensor>& params,
                                                 const Tensor& image, double tau,
                                                 AffinitySpectrum* embed_tap) {
    AnalysisProbe probe;
    model.forward(params, image, &probe);
    std::vector<AffinitySpectrum> out;
    out.reserve(probe.block_outputs.size());
    // eigencounting works on the plain Gram S_ij = z_i^T z_j; the softmax
    // token normalization is the visualization convention for cluster masks,
    // and flattening the tokens through it first hides the rank structure
    // the count is meant to expose.
    for (const Tensor& z : probe.block_outputs)
        out.push_back(significant_eigencount(affinity(z, /*normalize=*/false), tau));
    if (embed_tap)
        *embed_tap = significant_eigencount(
            affinity(probe.tokens_after_embed, /*normalize=*/false), tau);
    return out;
}

} // namespace fan
