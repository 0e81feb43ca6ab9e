// Reference implementations used only by tests. Each one is written without
// calling the library routine it checks.
#ifndef CRAN_TESTS_ORACLES_HPP_
#define CRAN_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cran/dataset.hpp"
#include "cran/synthetic.hpp"
#include "cran/tensor.hpp"

namespace oracle {

// Central difference of f with respect to one entry of t.
inline double central_difference(const std::function<double()>& f, cran::ad::Tensor t,
                                 std::size_t index, double step = 1e-5) {
  auto values = t.mutable_data();
  const double original = values[index];
  values[index] = original + step;
  const double plus = f();
  values[index] = original - step;
  const double minus = f();
  values[index] = original;
  return (plus - minus) / (2.0 * step);
}

inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Position of every element under "descending score, ties to the lower
// index", computed by counting rather than sorting.
inline std::vector<std::size_t> order_by_counting(const std::vector<double>& scores) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) ++ahead;
    }
    order[ahead] = i;
  }
  return order;
}

inline std::vector<std::size_t> top_k_by_counting(const std::vector<double>& scores,
                                                  std::size_t k) {
  auto order = order_by_counting(scores);
  order.resize(std::min(k, order.size()));
  return order;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Planted-concept decoder for synthetic data: recovers (subject, relation,
// object) from image regions by brute-force prototype matching, and from a
// caption by reading its words.
struct Tuple {
  std::size_t subject = 0, relation = 0, object = 0;
  bool operator==(const Tuple&) const = default;
};

class PlantedDecoder {
 public:
  explicit PlantedDecoder(const cran::data::SyntheticSpec& spec)
      : spec_(spec), protos_(cran::data::planted_prototypes(spec)) {}

  // Squared-distance cost of explaining the image with tuple t: best
  // subject region, best distinct object region, the rest background.
  double cost(const cran::enc::ImageInstance& image, const Tuple& t) const {
    const auto& regions = image.regions;
    const std::size_t n = regions.size();
    auto subject = protos_.objects[t.subject];
    auto object = protos_.objects[t.object];
    for (std::size_t d = 0; d < subject.size(); ++d) {
      subject[d] += protos_.subject_role[t.relation][d];
      object[d] += protos_.object_role[t.relation][d];
    }
    std::vector<double> background(n), as_subject(n), as_object(n);
    for (std::size_t j = 0; j < n; ++j) {
      background[j] = std::numeric_limits<double>::infinity();
      for (const auto& b : protos_.background) {
        background[j] = std::min(background[j], sq_dist(regions[j], b));
      }
      as_subject[j] = sq_dist(regions[j], subject);
      as_object[j] = sq_dist(regions[j], object);
    }
    double all_background = 0.0;
    for (double b : background) all_background += b;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        if (j == k) continue;
        best = std::min(best, all_background - background[j] - background[k] +
                                  as_subject[j] + as_object[k]);
      }
    }
    return best;
  }

  Tuple decode_image(const cran::enc::ImageInstance& image) const {
    Tuple best_t;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < spec_.objects.size(); ++s) {
      for (std::size_t r = 0; r < spec_.relations.size(); ++r) {
        for (std::size_t o = 0; o < spec_.objects.size(); ++o) {
          if (s == o) continue;
          const double c = cost(image, {s, r, o});
          if (c < best) {
            best = c;
            best_t = {s, r, o};
          }
        }
      }
    }
    return best_t;
  }

  Tuple decode_caption(const std::string& caption) const {
    std::istringstream words(caption);
    std::string a1, s, r, a2, o;
    words >> a1 >> s >> r >> a2 >> o;
    auto index = [](const std::vector<std::string>& names, const std::string& w) {
      return static_cast<std::size_t>(std::find(names.begin(), names.end(), w) -
                                      names.begin());
    };
    return {index(spec_.objects, s), index(spec_.relations, r), index(spec_.objects, o)};
  }

  // Similarity of image p and caption q: minus the cost of explaining the
  // image with the caption's tuple.
  std::vector<std::vector<double>> similarity(const cran::data::Dataset& ds,
                                              const std::vector<std::size_t>& members) const {
    std::vector<Tuple> captions;
    for (auto q : members) captions.push_back(decode_caption(ds.records()[q].caption));
    std::vector<std::vector<double>> sim(members.size(),
                                         std::vector<double>(members.size()));
    for (std::size_t p = 0; p < members.size(); ++p) {
      for (std::size_t q = 0; q < members.size(); ++q) {
        sim[p][q] = -cost(ds.records()[members[p]].image, captions[q]);
      }
    }
    return sim;
  }

 private:
  cran::data::SyntheticSpec spec_;
  cran::data::Prototypes protos_;
};

// R@1 of a similarity matrix whose diagonal holds the matched pairs.
struct RecallPair {
  double image_to_text = 0.0;
  double text_to_image = 0.0;
};

inline RecallPair recall_at_1(const std::vector<std::vector<double>>& sim) {
  const std::size_t n = sim.size();
  RecallPair r;
  for (std::size_t p = 0; p < n; ++p) {
    if (order_by_counting(sim[p]).front() == p) r.image_to_text += 1.0;
    std::vector<double> column(n);
    for (std::size_t i = 0; i < n; ++i) column[i] = sim[i][p];
    if (order_by_counting(column).front() == p) r.text_to_image += 1.0;
  }
  r.image_to_text /= static_cast<double>(n);
  r.text_to_image /= static_cast<double>(n);
  return r;
}

}  // namespace oracle

#endif  // CRAN_TESTS_ORACLES_HPP_
