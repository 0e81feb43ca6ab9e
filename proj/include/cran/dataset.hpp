#ifndef CRAN_DATASET_HPP_
#define CRAN_DATASET_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cran/encoders.hpp"

namespace cran::data {

enum class Split { kTrain, kVal, kTest };

std::string to_string(Split split);
Split parse_split(std::string_view text);

// One image with one caption. `gt_links` names the records whose captions
// describe this record's image (normally including the record itself).
struct Record {
  std::string id;
  Split split = Split::kTrain;
  enc::ImageInstance image;
  std::string caption;
  std::vector<std::string> gt_links;
};

struct DatasetMeta {
  std::size_t feature_dim = 0;
  std::size_t num_regions = 0;
  std::uint64_t seed = 0;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Record> records, DatasetMeta meta);

  const std::vector<Record>& records() const { return records_; }
  const DatasetMeta& meta() const { return meta_; }
  std::size_t size() const { return records_.size(); }

  // Record positions belonging to `split`, in file order.
  std::vector<std::size_t> indices(Split split) const;
  std::optional<std::size_t> find(std::string_view id) const;

  // Caption positions that are ground truth for the image of record `p`.
  const std::vector<std::size_t>& texts_for_image(std::size_t p) const {
    return image_to_texts_[p];
  }
  // Image positions that are ground truth for the caption of record `q`.
  const std::vector<std::size_t>& images_for_text(std::size_t q) const {
    return text_to_images_[q];
  }
  // Connected component of the link graph; records in one group are never
  // used as each other's negatives.
  std::size_t group(std::size_t p) const { return groups_[p]; }

 private:
  void index();

  std::vector<Record> records_;
  DatasetMeta meta_;
  std::vector<std::vector<std::size_t>> image_to_texts_;
  std::vector<std::vector<std::size_t>> text_to_images_;
  std::vector<std::size_t> groups_;
};

// Throws std::runtime_error "record <i> (<id>): ..." on the first violation:
// empty dataset, duplicate id, dimension mismatch, dangling or cross-split
// link, or an instance with no ground-truth partner.
void validate(const std::vector<Record>& records, const DatasetMeta& meta);

struct SaveOptions {
  // Store features as little-endian float32 in `<path>.bin`; offsets (in
  // floats) go in the header. Lossy for values not representable in float32.
  bool binary_sidecar = false;
};

void save_dataset(const std::string& path, const Dataset& dataset,
                  const SaveOptions& options = {});
Dataset load_dataset(const std::string& path);

// Seeded shuffle per epoch, then consecutive chunks of `batch_size`. A final
// chunk smaller than 2 is dropped. Every emitted batch spans at least two
// link groups.
class BatchIterator {
 public:
  BatchIterator(const Dataset& dataset, Split split, std::size_t batch_size,
                std::uint64_t seed);

  std::vector<std::vector<std::size_t>> epoch(std::size_t epoch_index) const;

 private:
  const Dataset* dataset_;
  std::vector<std::size_t> members_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

}  // namespace cran::data

#endif  // CRAN_DATASET_HPP_
