/**
 * Copyright 2026 The boxald Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "boxald/geometry.hpp"

namespace boxald {

using ImageId = std::int64_t;

struct GroundTruthBox {
  LabeledBox label;
  // Synthetic datasets carry a difficulty in [0, 1]; real data leaves it at 0.
  double difficulty = 0.0;
  // Annotation id in the source file, kept for export.
  std::int64_t source_id = -1;

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

struct ImageRecord {
  ImageId id = 0;
  double width = 0.0;
  double height = 0.0;
  std::string file_name;
  // A box's id is its position in this vector.
  std::vector<GroundTruthBox> boxes;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Category {
  int class_id = 0;
  std::string name;
  std::int64_t source_id = -1;

  friend bool operator==(const Category&, const Category&) = default;
};

class DatasetIndex {
 public:
  DatasetIndex() = default;
  DatasetIndex(std::vector<ImageRecord> images, std::vector<Category> categories);

  const std::vector<ImageRecord>& images() const { return images_; }
  const std::vector<Category>& categories() const { return categories_; }
  int num_classes() const { return static_cast<int>(categories_.size()); }
  std::size_t size() const { return images_.size(); }
  std::size_t total_boxes() const;

  bool contains(ImageId id) const { return positions_.count(id) != 0; }
  // Throws ConfigError for unknown ids.
  const ImageRecord& at(ImageId id) const;
  std::size_t position(ImageId id) const;

  // Appends a box created by a human annotator; returns its box id.
  std::size_t add_box(ImageId id, GroundTruthBox box);

  friend bool operator==(const DatasetIndex& a, const DatasetIndex& b) {
    return a.images_ == b.images_ && a.categories_ == b.categories_;
  }

 private:
  std::vector<ImageRecord> images_;
  std::vector<Category> categories_;
  std::unordered_map<ImageId, std::size_t> positions_;
};

}  // namespace boxald
