// Copyright 2026 The milfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// File formats: checkpoints (JSON), datasets / fused results / detections
// (JSON lines), plus small file helpers.

#ifndef MILFUSE_IO_HPP_
#define MILFUSE_IO_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "milfuse/fusion.hpp"
#include "milfuse/metrics.hpp"
#include "milfuse/milnet.hpp"
#include "milfuse/synthgen.hpp"

namespace milfuse {

inline constexpr int kParamsFormatVersion = 1;

/// {format_version, l, C, K, R, cls: {w, b}, det: [{w, b}], refine: [{w, b}]}
/// with every w stored row-major as l nested arrays.
std::string params_to_json(const ModelParams& params);
ModelParams params_from_json(const std::string& text);

void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const std::filesystem::path& path);

/// One image per line: {image_id, labels, proposals: [{box, feature}], gt: [{class_id, box}]}.
std::string split_to_jsonl(const Split& split);
Split split_from_jsonl(const std::string& text);

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
/// Reads dir/train.jsonl and dir/test.jsonl.
Dataset load_dataset(const std::filesystem::path& dir);

/// One line per positive class: {image_id, class_id, boxes: [{x1, y1, x2, y2, score, branch}]}.
std::string fused_to_jsonl(const std::string& image_id, const FusedResult& fused);

/// One line per image: {image_id, detections: [{class_id, box, score}]}.
std::string detections_to_jsonl(std::span<const ProposalBag> bags,
                                std::span<const Detection> dets);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string sha256_hex(const std::string& data);

}  // namespace milfuse

#endif  // MILFUSE_IO_HPP_
