#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "binary_io.hpp"
#include "synprobe/error.hpp"
#include "synprobe/hashing.hpp"
#include "synprobe/probes.hpp"

namespace synprobe {

namespace {

constexpr char kPrbMagic[4] = {'P', 'R', 'B', '1'};
constexpr std::uint32_t kPrbVersion = 1;

void put_matrix(detail::ByteWriter& w, const Eigen::MatrixXd& m) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.put<double>(m(r, c));
  }
}

Eigen::MatrixXd get_matrix(detail::ByteReader& r) {
  const auto rows = r.get<std::uint32_t>();
  const auto cols = r.get<std::uint32_t>();
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = r.get<double>();
  }
  return m;
}

}  // namespace

std::string serialize_checkpoint(const ProbeCheckpoint& ckpt) {
  detail::ByteWriter w;
  w.put_bytes(kPrbMagic, 4);
  w.put<std::uint32_t>(kPrbVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(ckpt.params.family));
  w.put_string(ckpt.model_id);
  w.put_string(ckpt.provenance);
  w.put<std::int32_t>(ckpt.layer);
  w.put<std::int32_t>(ckpt.best_epoch);

  const auto& c = ckpt.config;
  w.put<std::int32_t>(c.batch_size);
  w.put<std::int32_t>(c.max_epochs);
  w.put<std::int32_t>(c.patience);
  w.put<double>(c.lr);
  w.put<double>(c.warmup_frac);
  w.put<std::uint8_t>(c.linear_decay ? 1 : 0);
  w.put<double>(c.weight_decay);
  w.put<double>(c.lambda_o);
  w.put<double>(c.huber_delta);
  w.put<std::int32_t>(c.rank);
  w.put<double>(c.beta1);
  w.put<double>(c.beta2);
  w.put<double>(c.eps);
  w.put<std::uint64_t>(c.seed);

  put_matrix(w, ckpt.params.proj);
  put_matrix(w, ckpt.params.ortho);
  put_matrix(w, ckpt.params.scale);
  put_matrix(w, ckpt.params.root);

  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.log.size()));
  for (const auto& e : ckpt.log) {
    w.put<std::int32_t>(e.epoch);
    w.put<double>(e.train_loss);
    w.put<double>(e.dev_metric);
    w.put<double>(e.lr);
  }
  return w.take();
}

ProbeCheckpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kPrbMagic, 4) != 0) {
    throw FormatError("not a PRB1 checkpoint (magic mismatch)");
  }
  detail::ByteReader r(bytes.substr(4));
  const auto version = r.get<std::uint32_t>();
  if (version != kPrbVersion) throw FormatError("unsupported PRB1 version " + std::to_string(version));
  ProbeCheckpoint ckpt;
  const auto family = r.get<std::uint8_t>();
  if (family > 3) throw FormatError("unknown probe family code " + std::to_string(family));
  ckpt.params.family = static_cast<ProbeFamily>(family);
  ckpt.model_id = r.get_string();
  ckpt.provenance = r.get_string();
  ckpt.layer = r.get<std::int32_t>();
  ckpt.best_epoch = r.get<std::int32_t>();

  auto& c = ckpt.config;
  c.batch_size = r.get<std::int32_t>();
  c.max_epochs = r.get<std::int32_t>();
  c.patience = r.get<std::int32_t>();
  c.lr = r.get<double>();
  c.warmup_frac = r.get<double>();
  c.linear_decay = r.get<std::uint8_t>() != 0;
  c.weight_decay = r.get<double>();
  c.lambda_o = r.get<double>();
  c.huber_delta = r.get<double>();
  c.rank = r.get<std::int32_t>();
  c.beta1 = r.get<double>();
  c.beta2 = r.get<double>();
  c.eps = r.get<double>();
  c.seed = r.get<std::uint64_t>();

  ckpt.params.proj = get_matrix(r);
  ckpt.params.ortho = get_matrix(r);
  ckpt.params.scale = get_matrix(r);
  ckpt.params.root = get_matrix(r);

  const auto n = r.get<std::uint32_t>();
  ckpt.log.resize(n);
  for (auto& e : ckpt.log) {
    e.epoch = r.get<std::int32_t>();
    e.train_loss = r.get<double>();
    e.dev_metric = r.get<double>();
    e.lr = r.get<double>();
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after PRB1 checkpoint");
  return ckpt;
}

void write_checkpoint(const std::string& path, const ProbeCheckpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ProbeCheckpoint read_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file_bytes(path)); }

std::string training_log_jsonl(std::span<const EpochRecord> log) {
  std::ostringstream out;
  for (const auto& e : log) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["dev_metric"] = e.dev_metric;
    j["lr"] = e.lr;
    out << j.dump() << '\n';
  }
  return out.str();
}

}  // namespace synprobe
