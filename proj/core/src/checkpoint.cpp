// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#include "brq/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace brq {
namespace {

using json = nlohmann::json;

void write_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::ifstream& in, const std::string& what) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (in.gcount() != 8) throw UserError("checkpoint: truncated " + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const CheckpointData& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("checkpoint: cannot open for writing: " + path);
  out.write(kCheckpointMagic, 4);

  json meta;
  meta["step"] = data.step;
  meta["adam_step"] = data.adam_step;
  meta["config"] = json::parse(data.config.to_json_text());
  meta["norm_stats"] = {{"mean", data.norm_stats.mean}, {"std", data.norm_stats.stddev}};
  if (data.cluster_model.has_value()) {
    meta["cluster_model"] = json::parse(cluster_model_to_json(*data.cluster_model));
  } else {
    meta["cluster_model"] = nullptr;
  }
  const std::string meta_text = meta.dump();
  write_u64(out, meta_text.size());
  out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));

  json index = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, m] : data.tensors) {
    index.push_back({{"name", name},
                     {"dtype", "f32"},
                     {"shape", {m.rows, m.cols}},
                     {"offset", offset}});
    offset += m.d.size() * sizeof(float);
  }
  const std::string index_text = index.dump();
  write_u64(out, index_text.size());
  out.write(index_text.data(), static_cast<std::streamsize>(index_text.size()));

  for (const auto& [name, m] : data.tensors) {
    (void)name;
    out.write(reinterpret_cast<const char*>(m.d.data()),
              static_cast<std::streamsize>(m.d.size() * sizeof(float)));
  }
  if (!out) throw UserError("checkpoint: write failed: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("checkpoint: cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw UserError("checkpoint: bad magic (not a BRQ1 file): " + path);
  }

  const std::uint64_t meta_len = read_u64(in, "metadata length");
  std::string meta_text(meta_len, '\0');
  in.read(meta_text.data(), static_cast<std::streamsize>(meta_len));
  if (static_cast<std::uint64_t>(in.gcount()) != meta_len) {
    throw UserError("checkpoint: truncated metadata: " + path);
  }
  json meta;
  try {
    meta = json::parse(meta_text);
  } catch (const json::exception& e) {
    throw UserError(std::string("checkpoint: malformed metadata: ") + e.what());
  }

  CheckpointData data;
  data.step = meta.at("step").get<long long>();
  data.adam_step = meta.at("adam_step").get<long long>();
  data.config = RunConfig::from_json_text(meta.at("config").dump());
  data.norm_stats.mean = meta.at("norm_stats").at("mean").get<std::vector<double>>();
  data.norm_stats.stddev = meta.at("norm_stats").at("std").get<std::vector<double>>();
  if (!meta.at("cluster_model").is_null()) {
    data.cluster_model = cluster_model_from_json(meta.at("cluster_model").dump());
  }

  const std::uint64_t index_len = read_u64(in, "index length");
  std::string index_text(index_len, '\0');
  in.read(index_text.data(), static_cast<std::streamsize>(index_len));
  if (static_cast<std::uint64_t>(in.gcount()) != index_len) {
    throw UserError("checkpoint: truncated index: " + path);
  }
  const json index = json::parse(index_text);

  const std::streampos data_start = in.tellg();
  for (const auto& entry : index) {
    const std::string name = entry.at("name").get<std::string>();
    if (entry.at("dtype").get<std::string>() != "f32") {
      throw UserError("checkpoint: unsupported dtype for tensor " + name);
    }
    const int rows = entry.at("shape").at(0).get<int>();
    const int cols = entry.at("shape").at(1).get<int>();
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    MatF m(rows, cols);
    in.seekg(data_start + static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(m.d.data()),
            static_cast<std::streamsize>(m.d.size() * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != m.d.size() * sizeof(float)) {
      throw UserError("checkpoint: truncated tensor data for " + name);
    }
    data.tensors.emplace_back(name, std::move(m));
  }
  return data;
}

}  // namespace brq
