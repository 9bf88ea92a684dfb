#pragma once

#include <optional>
#include <string>
#include <vector>

#include "symlab/matrix.hpp"

namespace symlab {

struct GramMatrix {
    Matrix g;
    std::vector<std::string> labels;  // empty or one per row

    /// Symmetrizes (G + G^T)/2 and checks shape, finiteness, the 1e-8
    /// relative symmetry tolerance and the label count.
    static GramMatrix from_matrix(const Matrix& g, std::vector<std::string> labels = {});
};

/// Two-sided centering (I - J/q) G (I - J/q) followed by a common rescaling
/// that makes the mean vector norm (mean of sqrt of the diagonal) equal one.
GramMatrix normalize_gram(const GramMatrix& g);

struct EtfDistance {
    double delta = 0.0;
    double c_star = 0.0;
};

/// ||c* G - M*||_F / ||M*||_F with the best scalar c* = <G, M*> / <G, G>.
EtfDistance etf_distance(const Matrix& g);

/// (1/q) sum_k P^k G P^{-k} with P the one-step cyclic shift.
Matrix circulant_project(const Matrix& g);

/// ||G - circulant_project(G)||_F / ||G||_F.
double circ_distance(const Matrix& g);

struct DiagnosticChecks {
    bool etf = true;
    bool circ = true;
};

struct DiagnosticsReport {
    GramMatrix normalized;
    std::optional<double> delta_etf;
    std::optional<double> delta_etf_raw;
    std::optional<double> c_star;
    /// c* <= 0: the Gram points away from the simplex ETF.
    bool anti_aligned = false;
    std::optional<double> delta_circ;
    std::optional<double> delta_circ_raw;
    std::optional<Matrix> circulant_projection;
    /// Heatmap values (the normalized Gram) and their axis labels.
    Matrix heatmap;
    std::vector<std::string> heatmap_labels;
};

DiagnosticsReport build_report(const GramMatrix& g, const DiagnosticChecks& checks = {});

}  // namespace symlab
