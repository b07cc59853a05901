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
#include "boxald/dataset.hpp"

#include <string>

#include "boxald/errors.hpp"

namespace boxald {

DatasetIndex::DatasetIndex(std::vector<ImageRecord> images, std::vector<Category> categories)
    : images_(std::move(images)), categories_(std::move(categories)) {
  for (std::size_t c = 0; c < categories_.size(); ++c) {
    if (categories_[c].class_id != static_cast<int>(c)) {
      throw ConfigError("dataset: category class ids must be contiguous from 0");
    }
  }
  for (std::size_t i = 0; i < images_.size(); ++i) {
    if (!positions_.emplace(images_[i].id, i).second) {
      throw ConfigError("dataset: duplicate image id " + std::to_string(images_[i].id));
    }
    for (const auto& b : images_[i].boxes) {
      if (b.label.class_id < 0 || b.label.class_id >= num_classes()) {
        throw ConfigError("dataset: image " + std::to_string(images_[i].id) +
                          " has a box with unknown class " + std::to_string(b.label.class_id));
      }
    }
  }
}

std::size_t DatasetIndex::total_boxes() const {
  std::size_t n = 0;
  for (const auto& img : images_) n += img.boxes.size();
  return n;
}

const ImageRecord& DatasetIndex::at(ImageId id) const { return images_[position(id)]; }

std::size_t DatasetIndex::position(ImageId id) const {
  const auto it = positions_.find(id);
  if (it == positions_.end()) throw ConfigError("dataset: unknown image id " + std::to_string(id));
  return it->second;
}

std::size_t DatasetIndex::add_box(ImageId id, GroundTruthBox box) {
  auto& img = images_[position(id)];
  if (box.label.class_id < 0 || box.label.class_id >= num_classes()) {
    throw ConfigError("dataset: added box has unknown class " + std::to_string(box.label.class_id));
  }
  img.boxes.push_back(std::move(box));
  return img.boxes.size() - 1;
}

}  // namespace boxald
