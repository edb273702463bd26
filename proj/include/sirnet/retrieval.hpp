#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sirnet/model.hpp"
#include "sirnet/tensor.hpp"

namespace sirnet {

/// [e_I | e_A | alpha * GAP(E_b(x))], length d + C_b.
struct FusedEmbedding {
  std::vector<double> values;
  double alpha = 0.55;
};

/// Eval-mode embeddings of a (B, C*H*W) image batch. With `use_flip` each
/// embedding is the elementwise mean over the image and its mirror.
std::vector<FusedEmbedding> embed_for_eval(const SirNet& model, const Tensor& images, double alpha,
                                           bool use_flip);

struct RankedItem {
  std::size_t gallery_index = 0;
  double distance = 0.0;
};

/// Gallery sorted by ascending Euclidean distance; ties keep gallery order.
std::vector<RankedItem> rank_gallery(const FusedEmbedding& query,
                                     std::span<const FusedEmbedding> gallery);

struct RetrievalResult {
  std::vector<std::vector<std::size_t>> ranked_labels;  // per query
  std::vector<double> cmc;                              // cmc[k-1] = rank-k rate
  double map = 0.0;
  std::size_t num_queries = 0;
  std::size_t num_gallery = 0;
  // Queries without any relevant gallery item; excluded from mAP.
  std::vector<std::size_t> unmatched_queries;

  double rank(std::size_t k) const;
};

/// `rankings[q]` lists gallery indices best-first. AP = (1/R) * sum over
/// relevant positions r of hits(<= r) / r.
RetrievalResult cmc_and_map(const std::vector<std::vector<std::size_t>>& rankings,
                            std::span<const std::size_t> query_labels,
                            std::span<const std::size_t> gallery_labels);

struct Dataset;

/// Embeds the query and gallery splits of `data`, ranks the gallery for
/// every query and scores the rankings. `rankings`, when given, receives the
/// ranked lists. With `gallery_is_query` the query split doubles as gallery.
RetrievalResult evaluate_retrieval(const SirNet& model, const Dataset& data, double alpha,
                                   bool use_flip,
                                   std::vector<std::vector<RankedItem>>* rankings = nullptr,
                                   bool gallery_is_query = false);

/// {rank1, rank5, rank10, map, num_queries, num_gallery, alpha}
std::string metrics_json(const RetrievalResult& result, double alpha);

/// query_id,rank,gallery_id,distance with 1-based ranks.
void write_rankings_csv(std::ostream& out, const std::vector<std::vector<RankedItem>>& rankings,
                        std::span<const std::size_t> query_ids,
                        std::span<const std::size_t> gallery_ids);

}  // namespace sirnet
