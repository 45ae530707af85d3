#include "evogan/checkpoint.hpp"

#include <cereal/archives/portable_binary.hpp>
#include <cereal/types/optional.hpp>
#include <cereal/types/string.hpp>
#include <cereal/types/vector.hpp>

#include <fstream>
#include <sstream>

namespace evogan {

namespace {

constexpr const char *kMagic = "EVOGAN-CKPT";

template <typename Scalar>
const char *scalar_name() {
  return std::is_same_v<Scalar, float> ? "float32" : "float64";
}

template <typename Scalar>
struct Blob {
  std::string name;
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<Scalar> data;

  template <typename Archive>
  void serialize(Archive &ar) {
    ar(name, rows, cols, data);
  }
};

template <typename Scalar, typename Derived>
Blob<Scalar> to_blob(const std::string &name, const Eigen::MatrixBase<Derived> &m) {
  Blob<Scalar> b{name, m.rows(), m.cols(), {}};
  const Matrix<Scalar> dense = m;
  b.data.assign(dense.data(), dense.data() + dense.size());
  return b;
}

template <typename Scalar, typename Derived>
void from_blob(const Blob<Scalar> &b, const std::string &name, Eigen::MatrixBase<Derived> &m) {
  if (b.name != name || b.rows != m.rows() || b.cols != m.cols()) {
    throw CheckpointError("checkpoint entry '" + b.name + "' (" + std::to_string(b.rows) + "x" +
                          std::to_string(b.cols) + ") does not match '" + name + "' (" + std::to_string(m.rows()) +
                          "x" + std::to_string(m.cols()) + ")");
  }
  m = Eigen::Map<const Matrix<Scalar>>(b.data.data(), b.rows, b.cols);
}

struct StoredRecord {
  int epoch = 0;
  double g_loss = 0.0;
  double d_loss = 0.0;
  std::optional<double> fid;
  std::optional<double> ga_best_fitness;
  double wall_time = 0.0;

  template <typename Archive>
  void serialize(Archive &ar) {
    ar(epoch, g_loss, d_loss, fid, ga_best_fitness, wall_time);
  }
};

template <typename Scalar>
struct OptimizerBlob {
  std::int64_t steps = 0;
  std::vector<Blob<Scalar>> first;
  std::vector<Blob<Scalar>> second;

  template <typename Archive>
  void serialize(Archive &ar) {
    ar(steps, first, second);
  }
};

template <typename Scalar>
struct Payload {
  std::string magic;
  std::uint32_t version = 0;
  std::string scalar;
  std::string config;
  int epoch = 0;
  std::int64_t steps = 0;
  std::vector<Blob<Scalar>> parameters;
  std::vector<Blob<Scalar>> batch_norm;
  OptimizerBlob<Scalar> g_opt;
  OptimizerBlob<Scalar> d_opt;
  OptimizerBlob<Scalar> q_opt;
  std::string data_rng;
  std::string latent_rng;
  std::string ga_rng;
  std::vector<StoredRecord> history;

  template <typename Archive>
  void serialize(Archive &ar) {
    ar(magic, version, scalar, config, epoch, steps, parameters, batch_norm, g_opt, d_opt, q_opt, data_rng,
       latent_rng, ga_rng, history);
  }
};

struct Header {
  std::string magic;
  std::uint32_t version = 0;
  std::string scalar;
  std::string config;

  template <typename Archive>
  void serialize(Archive &ar) {
    ar(magic, version, scalar, config);
  }
};

template <typename Scalar>
nn::ParameterRefs<Scalar> all_parameters(TrainingState<Scalar> &s) {
  auto out = s.generator.parameters();
  for (auto *p : s.discriminator.parameters()) {
    out.push_back(p);
  }
  return out;
}

std::string rng_text(const std::mt19937_64 &rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void rng_restore(std::mt19937_64 &rng, const std::string &text) {
  std::istringstream is(text);
  is >> rng;
  if (!is) {
    throw CheckpointError("checkpoint holds a malformed random stream");
  }
}

template <typename Scalar>
OptimizerBlob<Scalar> save_optimizer(nn::Adam<Scalar> &opt) {
  OptimizerBlob<Scalar> out;
  out.steps = opt.steps();
  const auto &params = opt.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.first.push_back(to_blob<Scalar>(params[i]->name, opt.first_moments()[i]));
    out.second.push_back(to_blob<Scalar>(params[i]->name, opt.second_moments()[i]));
  }
  return out;
}

template <typename Scalar>
void load_optimizer(nn::Adam<Scalar> &opt, const OptimizerBlob<Scalar> &blob) {
  const auto &params = opt.parameters();
  if (blob.first.size() != params.size() || blob.second.size() != params.size()) {
    throw CheckpointError("checkpoint optimizer state does not match the parameter group");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    from_blob(blob.first[i], params[i]->name, opt.first_moments()[i]);
    from_blob(blob.second[i], params[i]->name, opt.second_moments()[i]);
  }
  opt.set_steps(blob.steps);
}

Header read_header(std::istream &is, const std::filesystem::path &path) {
  Header h;
  try {
    cereal::PortableBinaryInputArchive ar(is);
    ar(h);
  } catch (const std::exception &e) {
    throw CheckpointError("cannot read checkpoint " + path.string() + ": " + e.what());
  }
  if (h.magic != kMagic) {
    throw CheckpointError(path.string() + " is not a checkpoint");
  }
  if (h.version != kCheckpointVersion) {
    throw CheckpointError(path.string() + " has checkpoint version " + std::to_string(h.version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  }
  return h;
}

} // namespace

template <typename Scalar>
void save_checkpoint(const std::filesystem::path &path, TrainingState<Scalar> &state, const TrainingConfig &config) {
  Payload<Scalar> p;
  p.magic = kMagic;
  p.version = kCheckpointVersion;
  p.scalar = scalar_name<Scalar>();
  p.config = to_ini(config);
  p.epoch = state.epoch;
  p.steps = state.steps;
  for (auto *param : all_parameters(state)) {
    p.parameters.push_back(to_blob<Scalar>(param->name, param->value));
  }
  for (auto *bn : state.generator.batch_norms()) {
    p.batch_norm.push_back(to_blob<Scalar>("running_mean", bn->running_mean()));
    p.batch_norm.push_back(to_blob<Scalar>("running_var", bn->running_var()));
  }
  p.g_opt = save_optimizer(state.g_optimizer);
  p.d_opt = save_optimizer(state.d_optimizer);
  p.q_opt = save_optimizer(state.q_optimizer);
  p.data_rng = rng_text(state.data_rng);
  p.latent_rng = rng_text(state.latent_rng);
  p.ga_rng = rng_text(state.ga_rng);
  for (const auto &r : state.history) {
    p.history.push_back({r.epoch, r.g_loss, r.d_loss, r.fid, r.ga_best_fitness, r.wall_time});
  }

  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) {
      throw CheckpointError("cannot write checkpoint " + tmp.string());
    }
    cereal::PortableBinaryOutputArchive ar(os);
    ar(p);
  }
  std::filesystem::rename(tmp, path);
}

template <typename Scalar>
void load_checkpoint(const std::filesystem::path &path, TrainingState<Scalar> &state) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw CheckpointError("cannot open checkpoint " + path.string());
  }
  Payload<Scalar> p;
  try {
    cereal::PortableBinaryInputArchive ar(is);
    ar(p);
  } catch (const std::exception &e) {
    throw CheckpointError("cannot read checkpoint " + path.string() + ": " + e.what());
  }
  if (p.magic != kMagic || p.version != kCheckpointVersion) {
    throw CheckpointError(path.string() + " is not a version " + std::to_string(kCheckpointVersion) + " checkpoint");
  }
  if (p.scalar != scalar_name<Scalar>()) {
    throw CheckpointError(path.string() + " stores " + p.scalar + " parameters, expected " + scalar_name<Scalar>());
  }
  auto params = all_parameters(state);
  if (params.size() != p.parameters.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(p.parameters.size()) + " parameters, network has " +
                          std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    from_blob(p.parameters[i], params[i]->name, params[i]->value);
    params[i]->zero_grad();
  }
  auto bns = state.generator.batch_norms();
  if (p.batch_norm.size() != 2 * bns.size()) {
    throw CheckpointError("checkpoint batch-norm statistics do not match the generator");
  }
  for (std::size_t i = 0; i < bns.size(); ++i) {
    from_blob(p.batch_norm[2 * i], "running_mean", bns[i]->running_mean());
    from_blob(p.batch_norm[2 * i + 1], "running_var", bns[i]->running_var());
  }
  load_optimizer(state.g_optimizer, p.g_opt);
  load_optimizer(state.d_optimizer, p.d_opt);
  load_optimizer(state.q_optimizer, p.q_opt);
  rng_restore(state.data_rng, p.data_rng);
  rng_restore(state.latent_rng, p.latent_rng);
  rng_restore(state.ga_rng, p.ga_rng);
  state.epoch = p.epoch;
  state.steps = p.steps;
  state.history.clear();
  for (const auto &r : p.history) {
    state.history.push_back({r.epoch, r.g_loss, r.d_loss, r.fid, r.ga_best_fitness, r.wall_time});
  }
}

TrainingConfig read_checkpoint_config(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw CheckpointError("cannot open checkpoint " + path.string());
  }
  return parse_config(read_header(is, path).config);
}

std::filesystem::path checkpoint_path(const std::filesystem::path &dir, int epoch) {
  return dir / ("checkpoint_epoch_" + std::to_string(epoch) + ".ckpt");
}

std::filesystem::path latest_checkpoint_path(const std::filesystem::path &dir) { return dir / "checkpoint_latest.ckpt"; }

template void save_checkpoint<float>(const std::filesystem::path &, TrainingState<float> &, const TrainingConfig &);
template void save_checkpoint<double>(const std::filesystem::path &, TrainingState<double> &, const TrainingConfig &);
template void load_checkpoint<float>(const std::filesystem::path &, TrainingState<float> &);
template void load_checkpoint<double>(const std::filesystem::path &, TrainingState<double> &);

} // namespace evogan
