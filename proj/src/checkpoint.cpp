#include "spcg/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "spcg/json_convert.hpp"

namespace spcg {

namespace fs = std::filesystem;
using nlohmann::json;

void to_json(json& j, const ModelConfig& cfg) {
  j = json{{"image_channels", cfg.image_channels},
           {"num_classes", cfg.num_classes},
           {"segmenter", segmenter_kind_name(cfg.segmenter_kind)},
           {"base_width", cfg.base_width},
           {"generator_blocks", cfg.generator_blocks},
           {"init_seed", cfg.init_seed}};
}

void from_json(const json& j, ModelConfig& cfg) {
  ModelConfig defaults;
  cfg.image_channels = j.value("image_channels", defaults.image_channels);
  cfg.num_classes = j.value("num_classes", defaults.num_classes);
  cfg.segmenter_kind = segmenter_kind_from_name(
      j.value("segmenter", std::string(segmenter_kind_name(defaults.segmenter_kind))));
  cfg.base_width = j.value("base_width", defaults.base_width);
  cfg.generator_blocks = j.value("generator_blocks", defaults.generator_blocks);
  cfg.init_seed = j.value("init_seed", defaults.init_seed);
}

namespace {

constexpr char kMagic[8] = {'S', 'P', 'C', 'G', 'C', 'K', 'P', 'T'};

struct ParsedHeader {
  CheckpointMeta meta;
  json tensors;
  std::uint64_t payload_offset = 0;
};

ParsedHeader read_header(std::ifstream& in, const fs::path& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw_data("not a checkpoint file: " + path.string());
  }
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || header_len == 0 || header_len > (1ULL << 30)) {
    throw_data("corrupt checkpoint header in " + path.string());
  }
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw_data("truncated checkpoint header in " + path.string());

  json header = json::parse(text, nullptr, false);
  if (header.is_discarded()) throw_data("unparsable checkpoint header in " + path.string());

  ParsedHeader out;
  out.meta.model = header.at("model").get<ModelConfig>();
  out.meta.epoch = header.value("epoch", 0);
  out.meta.role = header.value("role", std::string());
  out.tensors = header.at("tensors");
  out.payload_offset = 16 + header_len;
  return out;
}

}  // namespace

void save_checkpoint(const fs::path& path, const std::vector<nn::NamedParam>& params,
                     const ModelConfig& model, int epoch, const std::string& role) {
  json header;
  header["format"] = 1;
  header["model"] = model;
  header["epoch"] = epoch;
  header["role"] = role;
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const nn::NamedParam& np : params) {
    const Shape s = np.param->value.shape;
    tensors.push_back({{"name", np.name},
                       {"shape", {s.n, s.c, s.h, s.w}},
                       {"offset", offset},
                       {"count", np.param->value.numel()}});
    offset += static_cast<std::uint64_t>(np.param->value.numel()) * sizeof(real_t);
  }
  header["tensors"] = std::move(tensors);
  const std::string text = header.dump();

  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot open " + tmp.string() + " for writing");
    out.write(kMagic, 8);
    const std::uint64_t header_len = text.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const nn::NamedParam& np : params) {
      const Tensor& t = np.param->value;
      out.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.v.size() * sizeof(real_t)));
    }
    if (!out) throw_io("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);  // atomic publish
}

CheckpointMeta load_checkpoint(const fs::path& path, const std::vector<nn::NamedParam>& params,
                               const ModelConfig& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open checkpoint " + path.string());
  ParsedHeader header = read_header(in, path);

  if (!(header.meta.model == expected)) {
    throw_validation("checkpoint " + path.string() +
                     " was written with a different model configuration");
  }

  std::size_t loaded = 0;
  for (const nn::NamedParam& np : params) {
    bool found = false;
    for (const json& entry : header.tensors) {
      if (entry.at("name").get<std::string>() != np.name) continue;
      const auto dims = entry.at("shape").get<std::vector<int>>();
      const Shape want = np.param->value.shape;
      if (dims.size() != 4 || dims[0] != want.n || dims[1] != want.c || dims[2] != want.h ||
          dims[3] != want.w) {
        throw_validation("checkpoint tensor '" + np.name + "' has mismatched shape");
      }
      in.seekg(static_cast<std::streamoff>(header.payload_offset +
                                           entry.at("offset").get<std::uint64_t>()));
      in.read(reinterpret_cast<char*>(np.param->value.data()),
              static_cast<std::streamsize>(np.param->value.v.size() * sizeof(real_t)));
      if (!in) throw_data("truncated checkpoint payload in " + path.string());
      found = true;
      break;
    }
    if (!found) throw_validation("checkpoint is missing tensor '" + np.name + "'");
    ++loaded;
  }
  if (loaded != header.tensors.size()) {
    throw_validation("checkpoint " + path.string() + " holds " +
                     std::to_string(header.tensors.size()) + " tensors but the model expects " +
                     std::to_string(loaded));
  }
  return header.meta;
}

CheckpointMeta read_checkpoint_meta(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open checkpoint " + path.string());
  return read_header(in, path).meta;
}

}  // namespace spcg
