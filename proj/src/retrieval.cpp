#include "sirnet/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "sirnet/data_synth.hpp"
#include "sirnet/kv_io.hpp"
#include "sirnet/ops.hpp"

namespace sirnet {
namespace {

std::vector<FusedEmbedding> fuse(const SirNet& model, const Tensor& images, double alpha) {
  NoGradGuard no_grad;
  const auto features = model.backbone(images);
  const auto emb = model.separate(features);
  const auto pooled = global_average_pool(features, model.config().features);
  const std::size_t rows = images.dim(0);
  const std::size_t d_id = emb.id.dim(1);
  const std::size_t d_attr = emb.attr.dim(1);
  const std::size_t c = pooled.dim(1);
  std::vector<FusedEmbedding> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto& v = out[r].values;
    out[r].alpha = alpha;
    v.reserve(d_id + d_attr + c);
    for (std::size_t k = 0; k < d_id; ++k) v.push_back(emb.id.data()[r * d_id + k]);
    for (std::size_t k = 0; k < d_attr; ++k) v.push_back(emb.attr.data()[r * d_attr + k]);
    for (std::size_t k = 0; k < c; ++k) v.push_back(alpha * pooled.data()[r * c + k]);
  }
  return out;
}

}  // namespace

std::vector<FusedEmbedding> embed_for_eval(const SirNet& model, const Tensor& images, double alpha,
                                           bool use_flip) {
  auto out = fuse(model, images, alpha);
  if (!use_flip) return out;
  const auto& shape = model.config().image;
  std::vector<double> flipped;
  flipped.reserve(images.numel());
  for (std::size_t r = 0; r < images.dim(0); ++r) {
    const auto img = horizontal_flip(images.data().subspan(r * shape.numel(), shape.numel()), shape);
    flipped.insert(flipped.end(), img.begin(), img.end());
  }
  const auto mirrored =
      fuse(model, Tensor::matrix(images.dim(0), shape.numel(), std::move(flipped)), alpha);
  for (std::size_t r = 0; r < out.size(); ++r) {
    for (std::size_t k = 0; k < out[r].values.size(); ++k) {
      out[r].values[k] = 0.5 * (out[r].values[k] + mirrored[r].values[k]);
    }
  }
  return out;
}

std::vector<RankedItem> rank_gallery(const FusedEmbedding& query,
                                     std::span<const FusedEmbedding> gallery) {
  std::vector<RankedItem> ranked;
  ranked.reserve(gallery.size());
  for (std::size_t g = 0; g < gallery.size(); ++g) {
    if (gallery[g].values.size() != query.values.size()) {
      throw DimensionError("rank_gallery: query of length " + std::to_string(query.values.size()) +
                           " vs gallery item of length " +
                           std::to_string(gallery[g].values.size()));
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < query.values.size(); ++k) {
      const double diff = query.values[k] - gallery[g].values[k];
      acc += diff * diff;
    }
    ranked.push_back({g, std::sqrt(acc)});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedItem& a, const RankedItem& b) { return a.distance < b.distance; });
  return ranked;
}

double RetrievalResult::rank(std::size_t k) const {
  if (cmc.empty() || k == 0) return 0.0;
  return cmc[std::min(k, cmc.size()) - 1];
}

RetrievalResult cmc_and_map(const std::vector<std::vector<std::size_t>>& rankings,
                            std::span<const std::size_t> query_labels,
                            std::span<const std::size_t> gallery_labels) {
  if (gallery_labels.empty()) throw ContractError("cmc_and_map: empty gallery");
  if (rankings.size() != query_labels.size()) {
    throw DimensionError("cmc_and_map: " + std::to_string(rankings.size()) + " rankings vs " +
                         std::to_string(query_labels.size()) + " query labels");
  }
  RetrievalResult result;
  result.num_queries = query_labels.size();
  result.num_gallery = gallery_labels.size();
  std::vector<double> first_hit_counts(gallery_labels.size(), 0.0);
  double ap_sum = 0.0;
  std::size_t ap_count = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const auto& order = rankings[q];
    if (order.size() != gallery_labels.size()) {
      throw DimensionError("cmc_and_map: ranking " + std::to_string(q) + " covers " +
                           std::to_string(order.size()) + " of " +
                           std::to_string(gallery_labels.size()) + " gallery items");
    }
    std::vector<std::size_t> labels;
    labels.reserve(order.size());
    std::size_t relevant = 0;
    for (auto g : order) {
      labels.push_back(gallery_labels[g]);
      if (gallery_labels[g] == query_labels[q]) ++relevant;
    }
    result.ranked_labels.push_back(labels);
    if (relevant == 0) {
      result.unmatched_queries.push_back(q);
      continue;
    }
    std::size_t hits = 0;
    double precision_sum = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
      if (labels[r] != query_labels[q]) continue;
      if (hits == 0) first_hit_counts[r] += 1.0;
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
    ap_sum += precision_sum / static_cast<double>(relevant);
    ++ap_count;
  }
  result.cmc.resize(gallery_labels.size());
  double running = 0.0;
  for (std::size_t k = 0; k < first_hit_counts.size(); ++k) {
    running += first_hit_counts[k];
    result.cmc[k] = result.num_queries == 0 ? 0.0 : running / static_cast<double>(result.num_queries);
  }
  result.map = ap_count == 0 ? 0.0 : ap_sum / static_cast<double>(ap_count);
  return result;
}

std::string metrics_json(const RetrievalResult& result, double alpha) {
  nlohmann::ordered_json j;
  j["rank1"] = result.rank(1);
  j["rank5"] = result.rank(5);
  j["rank10"] = result.rank(10);
  j["map"] = result.map;
  j["num_queries"] = result.num_queries;
  j["num_gallery"] = result.num_gallery;
  j["alpha"] = alpha;
  return j.dump(2);
}

void write_rankings_csv(std::ostream& out, const std::vector<std::vector<RankedItem>>& rankings,
                        std::span<const std::size_t> query_ids,
                        std::span<const std::size_t> gallery_ids) {
  out << "query_id,rank,gallery_id,distance\n";
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    for (std::size_t r = 0; r < rankings[q].size(); ++r) {
      out << query_ids[q] << ',' << (r + 1) << ',' << gallery_ids[rankings[q][r].gallery_index]
          << ',' << format_double(rankings[q][r].distance) << '\n';
    }
  }
}

RetrievalResult evaluate_retrieval(const SirNet& model, const Dataset& data, double alpha,
                                   bool use_flip, std::vector<std::vector<RankedItem>>* rankings,
                                   bool gallery_is_query) {
  const auto& gallery_ids = gallery_is_query ? data.query : data.gallery;
  const auto query = embed_for_eval(model, data.batch(data.query), alpha, use_flip);
  const auto gallery = embed_for_eval(model, data.batch(gallery_ids), alpha, use_flip);
  std::vector<std::vector<std::size_t>> order(query.size());
  for (std::size_t q = 0; q < query.size(); ++q) {
    auto ranked = rank_gallery(query[q], gallery);
    for (const auto& item : ranked) order[q].push_back(item.gallery_index);
    if (rankings != nullptr) rankings->push_back(std::move(ranked));
  }
  return cmc_and_map(order, data.labels_of(data.query), data.labels_of(gallery_ids));
}

}  // namespace sirnet
