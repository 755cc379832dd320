#include "brim/classify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "brim/error.hpp"
#include "brim/numerics.hpp"
#include "brim/parallel.hpp"

namespace brim {

ScatterPair scatter_matrices(const Matrix& features, std::span<const int> labels, bool weight_by_count) {
  const Eigen::Index n = features.rows();
  const Eigen::Index f = features.cols();
  if (static_cast<std::size_t>(n) != labels.size())
    throw ParameterError("scatter_matrices: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                         " samples");
  std::map<int, std::size_t> slot;
  for (int l : labels) slot.emplace(l, 0);
  if (slot.size() < 2) throw ContractError("scatter_matrices: need at least two classes");

  ScatterPair out;
  for (auto& [label, idx] : slot) {
    idx = out.labels.size();
    out.labels.push_back(label);
  }
  const std::size_t c = out.labels.size();
  out.class_means.assign(c, Vector::Zero(f));
  out.class_counts.assign(c, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t j = slot[labels[i]];
    out.class_means[j] += features.row(i).transpose();
    ++out.class_counts[j];
  }
  for (std::size_t j = 0; j < c; ++j) out.class_means[j] /= static_cast<double>(out.class_counts[j]);

  out.s_intra = Matrix::Zero(f, f);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector d = features.row(i).transpose() - out.class_means[slot[labels[i]]];
    out.s_intra.noalias() += d * d.transpose();
  }

  out.overall_mean = Vector::Zero(f);
  if (weight_by_count) {
    for (std::size_t j = 0; j < c; ++j) out.overall_mean += static_cast<double>(out.class_counts[j]) * out.class_means[j];
    out.overall_mean /= static_cast<double>(n);
  } else {
    for (std::size_t j = 0; j < c; ++j) out.overall_mean += out.class_means[j];
    out.overall_mean /= static_cast<double>(c);
  }
  out.s_inter = Matrix::Zero(f, f);
  for (std::size_t j = 0; j < c; ++j) {
    const Vector d = out.class_means[j] - out.overall_mean;
    const double w = weight_by_count ? static_cast<double>(out.class_counts[j]) : 1.0;
    out.s_inter.noalias() += w * (d * d.transpose());
  }
  return out;
}

LdaModel lda_train(const Matrix& features, std::span<const int> labels, std::optional<double> ridge,
                   bool weight_by_count) {
  const ScatterPair sp = scatter_matrices(features, labels, weight_by_count);
  const Eigen::Index f = features.cols();
  double r = ridge ? *ridge : 1e-6 * sp.s_intra.trace() / static_cast<double>(f);
  if (r < 0) throw ParameterError("lda_train: ridge must be nonnegative");

  Eigen::MatrixXd reg = sp.s_intra;
  reg.diagonal().array() += r;
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  // LLT happily accepts a numerically zero pivot, so check the diagonal too.
  const Eigen::VectorXd piv = llt.matrixL().toDenseMatrix().diagonal();
  if (llt.info() != Eigen::Success || !(piv.minCoeff() > 1e-12 * piv.maxCoeff()))
    throw SingularMatrixError("lda_train: within-class scatter is singular; pass a nonzero ridge");

  // M = L^-1 S_II L^-T, symmetric by construction.
  Eigen::MatrixXd m = llt.matrixL().solve(Eigen::MatrixXd(sp.s_inter));
  m = llt.matrixL().solve(Eigen::MatrixXd(m.transpose()));
  Matrix sym = 0.5 * (m + m.transpose());
  const EigenResult eig = sym_eigen(sym);

  const Eigen::Index k = std::min<Eigen::Index>(static_cast<Eigen::Index>(sp.labels.size()) - 1, f);
  const Eigen::MatrixXd v = eig.vectors.leftCols(k);
  LdaModel model;
  model.directions = llt.matrixU().solve(v);
  model.class_labels = sp.labels;
  model.regularization = r;
  model.projected_means.resize(static_cast<Eigen::Index>(sp.labels.size()), k);
  for (std::size_t j = 0; j < sp.labels.size(); ++j)
    model.projected_means.row(static_cast<Eigen::Index>(j)) = (sp.class_means[j].transpose() * model.directions);
  return model;
}

std::vector<int> lda_predict(const LdaModel& model, const Matrix& features) {
  if (features.cols() != model.directions.rows())
    throw ParameterError("lda_predict: feature dimension " + std::to_string(features.cols()) + " but model expects " +
                         std::to_string(model.directions.rows()));
  const Matrix proj = features * model.directions;
  std::vector<int> out(static_cast<std::size_t>(features.rows()));
  parallel_for(out.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double best = 0.0;
      int best_label = 0;
      bool first = true;
      for (Eigen::Index j = 0; j < model.projected_means.rows(); ++j) {
        const double d = (proj.row(static_cast<Eigen::Index>(i)) - model.projected_means.row(j)).squaredNorm();
        const int label = model.class_labels[static_cast<std::size_t>(j)];
        if (first || d < best || (d == best && label < best_label)) {
          best = d;
          best_label = label;
          first = false;
        }
      }
      out[i] = best_label;
    }
  });
  return out;
}

std::vector<int> threshold_label(std::span<const double> scores, double k_sigma) {
  const std::size_t n = scores.size();
  if (n < 3) throw ParameterError("threshold_label: need at least 3 scores");
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0)) throw DegenerateInputError("threshold_label: scores have zero spread");

  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(scores[i] - mean) >= k_sigma * sd)
      out[i] = -1;
    else
      out[i] = scores[i] > mean ? 1 : 0;
  }
  return out;
}

}  // namespace brim
