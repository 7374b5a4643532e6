#include "dfield/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dfield/errors.hpp"
#include "dfield/io/dataset_io.hpp"

namespace dfield {

using nlohmann::json;
using nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'F', 'C', 'K'};

template <class U>
void put(std::string& out, U v) {
  char b[sizeof(U)];
  std::memcpy(b, &v, sizeof(U));
  out.append(b, sizeof(U));
}

template <class U>
U take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw ValidationError("checkpoint is truncated");
  U v;
  std::memcpy(&v, in.data() + pos, sizeof(U));
  pos += sizeof(U);
  return v;
}

using Mf = ad::Matrix<float>;

struct Tensor {
  std::string name;
  const Mf* value;
};

}  // namespace

std::unique_ptr<TrainState> initial_state(const RunConfig& config) {
  ModelConfig mc = config.model;
  mc.seed = config.seed;
  return std::make_unique<TrainState>(mc, config.train.loss.lr_pretrain, config.seed);
}

std::string encode_checkpoint(const TrainState& state, const RunConfig& config, const std::string& created) {
  const auto& params = state.model->params().params();
  std::vector<Tensor> tensors;
  for (const auto& p : params) tensors.push_back({"param/" + p.name, &p.var.value()});
  for (const auto& [id, mv] : state.optimizer.moments()) {
    if (id >= params.size()) throw ValidationError("optimizer moment refers to a missing parameter");
    tensors.push_back({"adam_m/" + params[id].name, &mv.first});
    tensors.push_back({"adam_v/" + params[id].name, &mv.second});
  }

  ordered_json manifest;
  manifest["schema_version"] = kCheckpointVersion;
  manifest["config_hash"] = config_hash(config);
  manifest["step"] = state.step;
  manifest["created"] = created;
  manifest["config"] = config_to_json(config);
  std::ostringstream rng;
  rng << state.rng;
  manifest["rng"] = rng.str();
  manifest["avg_geometry"] = state.avg_geometry;
  manifest["avg_color"] = state.avg_color;
  manifest["optimizer"] = {{"lr", state.optimizer.lr()}, {"steps", state.optimizer.steps()}};
  ordered_json list = ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    list.push_back({{"name", t.name}, {"shape", {t.value->rows(), t.value->cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.value->size()) * sizeof(float);
  }
  manifest["tensors"] = list;
  manifest["payload_bytes"] = offset;

  const std::string text = manifest.dump();
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& t : tensors) {
    // Eigen's default storage is column-major; the payload is row-major.
    for (Eigen::Index r = 0; r < t.value->rows(); ++r)
      for (Eigen::Index c = 0; c < t.value->cols(); ++c) put<float>(out, (*t.value)(r, c));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw ValidationError("not a checkpoint file");
  std::size_t pos = 4;
  if (take<std::uint32_t>(bytes, pos) != static_cast<std::uint32_t>(kCheckpointVersion)) {
    throw ValidationError("unsupported checkpoint version");
  }
  const auto mlen = take<std::uint64_t>(bytes, pos);
  if (mlen > bytes.size() - pos) throw ValidationError("checkpoint is truncated");
  json m;
  try {
    m = json::parse(bytes.substr(pos, mlen));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint manifest: ") + e.what());
  }
  pos += mlen;
  const std::size_t payload = bytes.size() - pos;

  Checkpoint ck;
  try {
    if (m.at("schema_version").get<int>() != kCheckpointVersion) throw ValidationError("unsupported checkpoint schema");
    ck.config = config_from_json(m.at("config"));
    if (m.at("config_hash").get<std::string>() != config_hash(ck.config)) {
      throw ValidationError("checkpoint config hash does not match its config");
    }
    ck.created = m.at("created").get<std::string>();
    if (m.at("payload_bytes").get<std::uint64_t>() != payload) {
      throw ValidationError("checkpoint payload length does not match the manifest");
    }
    ck.state = initial_state(ck.config);
    auto& st = *ck.state;
    st.step = m.at("step").get<long>();
    st.avg_geometry = m.at("avg_geometry").get<double>();
    st.avg_color = m.at("avg_color").get<double>();
    std::istringstream rng(m.at("rng").get<std::string>());
    rng >> st.rng;
    if (!rng) throw ValidationError("checkpoint generator state is corrupt");
    st.optimizer = Adam<float>(m.at("optimizer").at("lr").get<double>());
    st.optimizer.set_steps(m.at("optimizer").at("steps").get<long>());

    auto& params = st.model->params().params();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < params.size(); ++i) index[params[i].name] = i;
    std::vector<char> loaded(params.size(), 0);
    std::uint64_t expect = 0;
    for (const auto& t : m.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto rows = t.at("shape").at(0).get<Eigen::Index>();
      const auto cols = t.at("shape").at(1).get<Eigen::Index>();
      if (rows < 0 || cols < 0) throw ValidationError("negative tensor shape for " + name);
      if (t.at("offset").get<std::uint64_t>() != expect) throw ValidationError("tensor offsets are not contiguous");
      const std::uint64_t nbytes = static_cast<std::uint64_t>(rows) * cols * sizeof(float);
      if (expect + nbytes > payload) throw ValidationError("tensor " + name + " overruns the payload");
      Mf v(rows, cols);
      std::size_t p = pos + expect;
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) v(r, c) = take<float>(bytes, p);
      expect += nbytes;

      const auto slash = name.find('/');
      const std::string kind = name.substr(0, slash), pname = slash == std::string::npos ? "" : name.substr(slash + 1);
      auto it = index.find(pname);
      if (it == index.end()) throw ValidationError("checkpoint tensor " + name + " matches no parameter");
      auto& target = params[it->second].var;
      if (rows != target.rows() || cols != target.cols()) throw ValidationError("shape mismatch for " + name);
      if (kind == "param") {
        target.mutable_value() = std::move(v);
        loaded[it->second] = 1;
      } else if (kind == "adam_m") {
        st.optimizer.moments()[it->second].first = std::move(v);
      } else if (kind == "adam_v") {
        st.optimizer.moments()[it->second].second = std::move(v);
      } else {
        throw ValidationError("unknown checkpoint tensor kind in " + name);
      }
    }
    if (expect != payload) throw ValidationError("checkpoint payload length does not match the tensor list");
    for (std::size_t i = 0; i < params.size(); ++i)
      if (!loaded[i]) throw ValidationError("checkpoint lacks parameter " + params[i].name);
    for (const auto& [id, mv] : st.optimizer.moments())
      if (mv.first.size() != mv.second.size()) throw ValidationError("incomplete optimizer moments");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint manifest: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::string& path, const TrainState& state, const RunConfig& config,
                     const std::string& created) {
  const std::string tmp = path + ".tmp";
  write_text_file(tmp, encode_checkpoint(state, config, created));
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace dfield
