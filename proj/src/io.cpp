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

#include "milfuse/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

#include "json.hpp"

namespace milfuse {

using nlohmann::json;

namespace {

json box_array(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

Box box_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be [x1, y1, x2, y2]");
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw std::invalid_argument("box has x2 < x1 or y2 < y1");
  return b;
}

json linear_to_json(const Linear& layer) {
  json w = json::array();
  for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) row.push_back(layer.weight(i, j));
    w.push_back(std::move(row));
  }
  json b = json::array();
  for (Eigen::Index j = 0; j < layer.bias.size(); ++j) b.push_back(layer.bias[j]);
  return {{"w", std::move(w)}, {"b", std::move(b)}};
}

Linear linear_from_json(const json& j, int rows, int cols, const char* what) {
  const json& w = j.at("w");
  const json& b = j.at("b");
  if (!w.is_array() || static_cast<int>(w.size()) != rows || !b.is_array() ||
      static_cast<int>(b.size()) != cols)
    throw std::invalid_argument(std::string("checkpoint: bad shape for ") + what);
  Linear layer(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(w[i].size()) != cols)
      throw std::invalid_argument(std::string("checkpoint: ragged weight row in ") + what);
    for (int c = 0; c < cols; ++c) layer.weight(i, c) = w[i][c].get<double>();
  }
  for (int c = 0; c < cols; ++c) layer.bias[c] = b[c].get<double>();
  return layer;
}

}  // namespace

std::string params_to_json(const ModelParams& params) {
  json j;
  j["format_version"] = kParamsFormatVersion;
  j["l"] = params.feature_dim();
  j["C"] = params.num_classes();
  j["K"] = params.num_branches();
  j["R"] = params.num_stages();
  j["cls"] = linear_to_json(params.cls);
  j["det"] = json::array();
  for (const auto& d : params.det) j["det"].push_back(linear_to_json(d));
  j["refine"] = json::array();
  for (const auto& r : params.refine) j["refine"].push_back(linear_to_json(r));
  return j.dump();
}

ModelParams params_from_json(const std::string& text) {
  const json j = json::parse(text);
  const int version = j.at("format_version").get<int>();
  if (version != kParamsFormatVersion)
    throw std::invalid_argument("checkpoint: unsupported format_version " + std::to_string(version));
  const int l = j.at("l").get<int>();
  const int c = j.at("C").get<int>();
  const int k = j.at("K").get<int>();
  const int r = j.at("R").get<int>();
  if (static_cast<int>(j.at("det").size()) != k || static_cast<int>(j.at("refine").size()) != r)
    throw std::invalid_argument("checkpoint: branch/stage count disagrees with K/R");
  ModelParams p;
  p.cls = linear_from_json(j.at("cls"), l, c, "cls");
  for (const auto& d : j.at("det")) p.det.push_back(linear_from_json(d, l, c, "det"));
  for (const auto& s : j.at("refine")) p.refine.push_back(linear_from_json(s, l, c + 1, "refine"));
  p.validate();
  return p;
}

void save_params(const std::filesystem::path& path, const ModelParams& params) {
  write_text_file(path, params_to_json(params) + "\n");
}

ModelParams load_params(const std::filesystem::path& path) {
  return params_from_json(read_text_file(path));
}

std::string split_to_jsonl(const Split& split) {
  std::string out;
  for (std::size_t i = 0; i < split.bags.size(); ++i) {
    const ProposalBag& bag = split.bags[i];
    json j;
    j["image_id"] = bag.image_id;
    json labels = json::array();
    for (Eigen::Index c = 0; c < bag.labels.size(); ++c) labels.push_back(static_cast<int>(bag.labels[c]));
    j["labels"] = std::move(labels);
    json props = json::array();
    for (int n = 0; n < bag.num_proposals(); ++n) {
      json feat = json::array();
      for (Eigen::Index d = 0; d < bag.features.rows(); ++d) feat.push_back(bag.features(d, n));
      props.push_back({{"box", box_array(bag.boxes[n])}, {"feature", std::move(feat)}});
    }
    j["proposals"] = std::move(props);
    json gt = json::array();
    if (i < split.gt.images.size())
      for (const GtObject& o : split.gt.images[i])
        gt.push_back({{"class_id", o.class_id}, {"box", box_array(o.box)}});
    j["gt"] = std::move(gt);
    out += j.dump();
    out += '\n';
  }
  return out;
}

Split split_from_jsonl(const std::string& text) {
  Split split;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ProposalBag bag;
      bag.image_id = j.at("image_id").get<std::string>();
      const json& labels = j.at("labels");
      bag.labels.resize(static_cast<Eigen::Index>(labels.size()));
      for (std::size_t c = 0; c < labels.size(); ++c) bag.labels[c] = labels[c].get<double>();
      const json& props = j.at("proposals");
      if (props.empty()) throw std::invalid_argument("no proposals");
      const auto dim = static_cast<Eigen::Index>(props[0].at("feature").size());
      bag.features.resize(dim, static_cast<Eigen::Index>(props.size()));
      for (std::size_t n = 0; n < props.size(); ++n) {
        bag.boxes.push_back(box_from(props[n].at("box")));
        const json& feat = props[n].at("feature");
        if (static_cast<Eigen::Index>(feat.size()) != dim)
          throw std::invalid_argument("feature vectors have differing lengths");
        for (Eigen::Index d = 0; d < dim; ++d) bag.features(d, n) = feat[d].get<double>();
      }
      bag.validate();
      std::vector<GtObject> gt;
      if (j.contains("gt"))
        for (const json& o : j.at("gt"))
          gt.push_back({o.at("class_id").get<int>(), box_from(o.at("box"))});
      split.bags.push_back(std::move(bag));
      split.gt.images.push_back(std::move(gt));
    } catch (const std::exception& e) {
      throw std::invalid_argument("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return split;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "train.jsonl", split_to_jsonl(dataset.train));
  write_text_file(dir / "test.jsonl", split_to_jsonl(dataset.test));
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.train = split_from_jsonl(read_text_file(dir / "train.jsonl"));
  ds.test = split_from_jsonl(read_text_file(dir / "test.jsonl"));
  return ds;
}

std::string fused_to_jsonl(const std::string& image_id, const FusedResult& fused) {
  std::string out;
  for (std::size_t c = 0; c < fused.per_class.size(); ++c) {
    if (fused.per_class[c].empty()) continue;
    json boxes = json::array();
    for (const FusedBox& f : fused.per_class[c])
      boxes.push_back({{"x1", f.box.x1},
                       {"y1", f.box.y1},
                       {"x2", f.box.x2},
                       {"y2", f.box.y2},
                       {"score", f.score},
                       {"branch", f.branch}});
    json j{{"image_id", image_id}, {"class_id", c}, {"boxes", std::move(boxes)}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string detections_to_jsonl(std::span<const ProposalBag> bags,
                                std::span<const Detection> dets) {
  std::vector<json> per_image(bags.size(), json::array());
  for (const Detection& d : dets)
    per_image.at(d.image).push_back({{"class_id", d.det.class_id},
                                     {"box", box_array(d.det.box)},
                                     {"score", d.det.score}});
  std::string out;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    json j{{"image_id", bags[i].image_id}, {"detections", std::move(per_image[i])}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

}  // namespace milfuse
