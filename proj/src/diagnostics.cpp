#include "symlab/diagnostics.hpp"

#include <cmath>

#include "symlab/error.hpp"
#include "symlab/numerics.hpp"
#include "symlab/perm_solver.hpp"

namespace symlab {

GramMatrix GramMatrix::from_matrix(const Matrix& g, std::vector<std::string> labels) {
    if (!g.is_square() || g.rows() == 0) throw InvalidInput("Gram matrix must be square and nonempty");
    if (!g.all_finite()) throw InvalidInput("Gram matrix has non-finite entries");
    if (!labels.empty() && labels.size() != g.rows())
        throw InvalidInput("Gram matrix has " + std::to_string(labels.size()) + " labels for " +
                           std::to_string(g.rows()) + " rows");
    const double scale = std::max(frobenius_norm(g), 1e-300);
    if (frobenius_norm(g - g.transpose()) > 1e-8 * scale)
        throw InvalidInput("Gram matrix is not symmetric");
    return {symmetrized(g), std::move(labels)};
}

GramMatrix normalize_gram(const GramMatrix& g) {
    const std::size_t q = g.g.rows();
    const Matrix p = centering_projector(q);
    Matrix centered = symmetrized(p * g.g * p);
    const double scale = frobenius_norm(g.g);
    double mean_norm = 0.0;
    for (std::size_t i = 0; i < q; ++i) mean_norm += std::sqrt(std::max(0.0, centered(i, i)));
    mean_norm /= static_cast<double>(q);
    if (scale == 0.0 || mean_norm <= 1e-12 * std::sqrt(scale))
        throw DegenerateInput("centered Gram matrix vanishes; all vectors coincide");
    centered *= 1.0 / (mean_norm * mean_norm);
    return {std::move(centered), g.labels};
}

EtfDistance etf_distance(const Matrix& g) {
    if (!g.is_square()) throw InvalidInput("etf_distance: matrix must be square");
    const double gg = frobenius_norm_sq(g);
    if (gg == 0.0) throw DegenerateInput("etf_distance: zero matrix");
    const Matrix ref = etf_reference(g.rows());
    EtfDistance out;
    out.c_star = frobenius_dot(g, ref) / gg;
    out.delta = frobenius_norm(out.c_star * g - ref) / frobenius_norm(ref);
    return out;
}

Matrix circulant_project(const Matrix& g) {
    if (!g.is_square()) throw InvalidInput("circulant_project: matrix must be square");
    const std::size_t q = g.rows();
    Matrix out(q, q);
    for (std::size_t k = 0; k < q; ++k)
        for (std::size_t i = 0; i < q; ++i)
            for (std::size_t j = 0; j < q; ++j) out((i + k) % q, (j + k) % q) += g(i, j);
    out *= 1.0 / static_cast<double>(q);
    return out;
}

double circ_distance(const Matrix& g) {
    const double norm = frobenius_norm(g);
    if (norm == 0.0) throw DegenerateInput("circ_distance: zero matrix");
    return frobenius_norm(g - circulant_project(g)) / norm;
}

DiagnosticsReport build_report(const GramMatrix& g, const DiagnosticChecks& checks) {
    DiagnosticsReport r;
    r.normalized = normalize_gram(g);
    if (checks.etf) {
        const EtfDistance normalized = etf_distance(r.normalized.g);
        r.delta_etf = normalized.delta;
        r.c_star = normalized.c_star;
        r.anti_aligned = normalized.c_star <= 0.0;
        r.delta_etf_raw = etf_distance(g.g).delta;
    }
    if (checks.circ) {
        r.delta_circ = circ_distance(r.normalized.g);
        r.delta_circ_raw = circ_distance(g.g);
        r.circulant_projection = circulant_project(r.normalized.g);
    }
    r.heatmap = r.normalized.g;
    r.heatmap_labels = r.normalized.labels;
    return r;
}

}  // namespace symlab
