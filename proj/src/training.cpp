#include "hiker/training.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "hiker/rng.hpp"
#include "json_util.hpp"

namespace hiker {

using detail::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("TrainConfig: alpha outside [0,1]");
  if (batch < 1 || jobs < 1) throw std::invalid_argument("TrainConfig: batch/jobs must be >= 1");
  if (grad_clip < 0.0) throw std::invalid_argument("TrainConfig: negative grad_clip");
  if (precision != 32 && precision != 64)
    throw std::invalid_argument("TrainConfig: precision must be 32 or 64");
  if (steps < 0) throw std::invalid_argument("TrainConfig: steps must be >= 0");
}

uint64_t TrainConfig::hash() const {
  char buf[288];
  std::snprintf(buf, sizeof buf, "e%d lr%.17g st%d dc%.17g a%.17g c%.17g w%.17g/%.17g/%.17g "
                "ph%d eh%d ar%d es%d task%d t%d b%d p%d s%llu",
                epochs, lr, lr_step_every, lr_decay, alpha, grad_clip, weights.w_xp1,
                weights.w_xp2, weights.w_p, toggles.pred_hierarchy, toggles.ent_hierarchy,
                toggles.adaptive_refinement, entity_supervision, static_cast<int>(task), steps,
                batch, precision, static_cast<unsigned long long>(seed));
  return fnv1a64(std::string_view(buf));
}

ChainLosses compute_losses(const HierarchicalDistribution& dist, int gt_leaf,
                           const Hierarchy& h) {
  if (gt_leaf < 0 || gt_leaf >= h.n_leaves())
    throw std::invalid_argument("compute_losses: ground-truth leaf out of range");
  constexpr double kClamp = 1e-12;
  ChainLosses out;
  auto nll = [&](double p) {
    if (p <= kClamp) {
      out.saturated = true;
      p = kClamp;
    }
    return -std::log(p);
  };
  out.l_xp1 = nll(dist.l1[h.l1_of_leaf(gt_leaf)]);
  out.l_xp2 = nll(dist.l2_marginal(h, h.leaf_to_l2[gt_leaf]));
  out.l_p = nll(dist.joint[gt_leaf]);
  return out;
}

namespace {

struct ImageGrad {
  std::vector<Tensor2> grads;  // per parameter tensor
  LossIds losses;
  bool finite = true;
};

ImageGrad image_gradient(const Model& model, const CommonsenseGraph& kg,
                         const DetectionBundle& bundle, const TrainConfig& cfg) {
  ImageGrad out;
  ForwardOutputs fwd = model_forward(model, kg, bundle, cfg.task, true);
  out.losses = model_loss(fwd, kg, bundle, cfg.toggles, cfg.weights, cfg.entity_supervision);
  fwd.state.tape.backward(out.losses.total);
  out.grads.reserve(fwd.state.params.all.size());
  for (int pid : fwd.state.params.all) {
    const Tensor2& g = fwd.state.tape.grad(pid);
    if (!g.all_finite()) out.finite = false;
    out.grads.push_back(g);
  }
  if (!std::isfinite(fwd.state.tape.val(out.losses.total).at(0, 0))) out.finite = false;
  return out;
}

double epoch_lr(const TrainConfig& cfg, int epoch_index) {
  const int decays = cfg.lr_step_every > 0 ? epoch_index / cfg.lr_step_every : 0;
  return cfg.lr * std::pow(cfg.lr_decay, decays);
}

}  // namespace

EpochStats train_epoch(Model& model, const CommonsenseGraph& kg,
                       const std::vector<DetectionBundle>& data, const TrainConfig& cfg,
                       int epoch_index) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train_epoch: empty dataset");
  const auto t0 = std::chrono::steady_clock::now();

  EpochStats stats;
  stats.epoch = epoch_index;
  stats.lr_used = epoch_lr(cfg, epoch_index);

  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(cfg.seed, 1000 + static_cast<uint64_t>(epoch_index));
  shuffle_rng.shuffle(order);

  double sum_p = 0, sum_xp1 = 0, sum_xp2 = 0, sum_e = 0, sum_xe1 = 0, sum_xe2 = 0;
  long n_pred_targets = 0, n_ent_targets = 0;

  for (size_t start = 0; start < order.size(); start += cfg.batch) {
    const size_t end = std::min(order.size(), start + cfg.batch);
    std::vector<ImageGrad> slot(end - start);

    if (cfg.jobs <= 1 || end - start == 1) {
      for (size_t i = start; i < end; ++i)
        slot[i - start] = image_gradient(model, kg, data[order[i]], cfg);
    } else {
      // Workers fill disjoint slots; the reduction below runs in slot order
      // so the result is independent of scheduling.
      std::vector<std::thread> pool;
      std::atomic<size_t> next{start};
      const int n_workers = std::min<size_t>(cfg.jobs, end - start);
      for (int wkr = 0; wkr < n_workers; ++wkr)
        pool.emplace_back([&]() {
          for (size_t i = next.fetch_add(1); i < end; i = next.fetch_add(1))
            slot[i - start] = image_gradient(model, kg, data[order[i]], cfg);
        });
      for (auto& th : pool) th.join();
    }

    std::vector<Tensor2> accum;
    for (size_t k = 0; k < slot.size(); ++k) {
      ImageGrad& ig = slot[k];
      if (!ig.finite)
        throw std::runtime_error("train_epoch: non-finite gradient at epoch " +
                                 std::to_string(epoch_index) + ", image " +
                                 data[order[start + k]].image_id);
      if (accum.empty()) {
        accum = std::move(ig.grads);
      } else {
        for (size_t g = 0; g < accum.size(); ++g)
          for (size_t x = 0; x < accum[g].data.size(); ++x)
            accum[g].data[x] += ig.grads[g].data[x];
      }
      sum_p += ig.losses.l_p * ig.losses.n_pred_supervised;
      sum_xp1 += ig.losses.l_xp1 * ig.losses.n_pred_supervised;
      sum_xp2 += ig.losses.l_xp2 * ig.losses.n_pred_supervised;
      sum_e += ig.losses.l_e * ig.losses.n_ent_supervised;
      sum_xe1 += ig.losses.l_xe1 * ig.losses.n_ent_supervised;
      sum_xe2 += ig.losses.l_xe2 * ig.losses.n_ent_supervised;
      n_pred_targets += ig.losses.n_pred_supervised;
      n_ent_targets += ig.losses.n_ent_supervised;
      stats.saturated += ig.losses.saturated;
    }
    double step = -stats.lr_used / static_cast<double>(slot.size());
    if (cfg.grad_clip > 0.0) {
      double norm2 = 0.0;
      for (const auto& g : accum)
        for (double v : g.data) norm2 += v * v;
      const double norm = std::sqrt(norm2) / static_cast<double>(slot.size());
      if (norm > cfg.grad_clip) step *= cfg.grad_clip / norm;
    }
    model.params.add_scaled(accum, step);
    if (cfg.precision == 32) model.params.snap_to_f32();
  }

  if (n_pred_targets > 0) {
    stats.l_p = sum_p / n_pred_targets;
    stats.l_xp1 = sum_xp1 / n_pred_targets;
    stats.l_xp2 = sum_xp2 / n_pred_targets;
  }
  if (n_ent_targets > 0) {
    stats.l_e = sum_e / n_ent_targets;
    stats.l_xe1 = sum_xe1 / n_ent_targets;
    stats.l_xe2 = sum_xe2 / n_ent_targets;
  }
  stats.total = cfg.weights.w_p * (stats.l_p + stats.l_e) +
                cfg.weights.w_xp1 * (stats.l_xp1 + stats.l_xe1) +
                cfg.weights.w_xp2 * (stats.l_xp2 + stats.l_xe2);
  stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return stats;
}

ConfusionMatrix reevaluate_confusion(const Model& model, const CommonsenseGraph& kg,
                                     const std::vector<DetectionBundle>& data) {
  if (data.empty()) throw std::invalid_argument("reevaluate_confusion: empty dataset");
  const int c = kg.n_pred();
  Tensor2 counts(c, c);
  std::vector<long> gt_count(c, 0);
  TaskMode task = TaskMode::kPredCls;
  for (const auto& bundle : data) {
    if (bundle.gt.triplets.empty()) continue;
    ForwardOutputs out = model_forward(model, kg, bundle, task, false);
    // The model's own (unrefined) predictions: measuring the refined output
    // here would couple T to itself across epochs.
    const Tensor2& joint = out.state.tape.val(out.sp_joint);
    for (const auto& trip : bundle.gt.triplets) {
      const int k = pair_index(trip[0], trip[2], bundle.n());
      std::vector<double> row(joint.cols);
      for (int j = 0; j < joint.cols; ++j) row[j] = joint.at(k, j);
      counts.at(trip[1], predict_class(row)) += 1.0;
      ++gt_count[trip[1]];
    }
  }
  ConfusionMatrix r;
  r.labels = kg.pred_hier.leaf_names;
  r.m = Tensor2(c, c);
  for (int i = 0; i < c; ++i) {
    if (gt_count[i] == 0) {
      r.m.at(i, i) = 1.0;  // unseen class: one-hot diagonal
      continue;
    }
    for (int j = 0; j < c; ++j) r.m.at(i, j) = counts.at(i, j) / gt_count[i];
  }
  r.validate();
  return r;
}

TransitionMatrix blend_transition(const TransitionMatrix& t_new, const TransitionMatrix& t_old,
                                  double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("blend_transition: alpha outside [0,1]");
  if (!t_new.t.same_shape(t_old.t))
    throw std::invalid_argument("blend_transition: shape mismatch");
  TransitionMatrix out;
  out.t = t_new.t;
  for (size_t i = 0; i < out.t.data.size(); ++i)
    out.t.data[i] = alpha * t_new.t.data[i] + (1.0 - alpha) * t_old.t.data[i];
  return out;
}

TrainReport train(Model& model, const CommonsenseGraph& kg,
                  const std::vector<DetectionBundle>& data, const TrainConfig& cfg) {
  cfg.validate();
  if (model.transition.t.rows == 0)
    model.transition.t = Tensor2::identity(kg.n_pred());
  model.steps = cfg.steps;
  model.toggles = cfg.toggles;
  model.config_hash = cfg.hash();
  model.ent_hier_hash = kg.ent_hier.hash();
  model.pred_hier_hash = kg.pred_hier.hash();
  if (cfg.precision == 32) model.params.snap_to_f32();

  TrainReport report;
  report.config_hash = cfg.hash();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochStats stats = train_epoch(model, kg, data, cfg, epoch);
    // Refinement during this epoch used the blend through epoch-1; the
    // re-evaluation below still does, then the blend moves forward.
    stats.confusion = reevaluate_confusion(model, kg, data);
    if (cfg.toggles.adaptive_refinement) {
      TransitionMatrix t_raw = build_transition(stats.confusion);
      model.transition = blend_transition(t_raw, model.transition, cfg.alpha);
    }
    stats.blended_t = model.transition;
    report.epochs.push_back(std::move(stats));
  }
  return report;
}

void TrainReport::save(const std::string& path) const {
  json j;
  char hashbuf[32];
  std::snprintf(hashbuf, sizeof hashbuf, "%016llx",
                static_cast<unsigned long long>(config_hash));
  j["config_hash"] = hashbuf;
  json eps = json::array();
  for (const auto& e : epochs) {
    json je;
    je["epoch"] = e.epoch;
    je["l_xp1"] = e.l_xp1;
    je["l_xp2"] = e.l_xp2;
    je["l_p"] = e.l_p;
    je["l_xe1"] = e.l_xe1;
    je["l_xe2"] = e.l_xe2;
    je["l_e"] = e.l_e;
    je["total"] = e.total;
    je["saturated"] = e.saturated;
    je["lr"] = e.lr_used;
    je["wall_seconds"] = e.wall_seconds;
    json conf = json::array();
    for (int i = 0; i < e.confusion.m.rows; ++i) {
      json row = json::array();
      for (int k = 0; k < e.confusion.m.cols; ++k) row.push_back(e.confusion.m.at(i, k));
      conf.push_back(std::move(row));
    }
    je["confusion"] = std::move(conf);
    json tm = json::array();
    for (int i = 0; i < e.blended_t.t.rows; ++i) {
      json row = json::array();
      for (int k = 0; k < e.blended_t.t.cols; ++k) row.push_back(e.blended_t.t.at(i, k));
      tm.push_back(std::move(row));
    }
    je["blended_transition"] = std::move(tm);
    eps.push_back(std::move(je));
  }
  j["epochs"] = std::move(eps);
  detail::save_json_file(path, j, -1);
}

// ---------------------------------------------------------------------------
// Checkpoint: "HIKR1" magic, u32 version, 9 x i32 dims, u32 block count,
// then per block u64 element count + little-endian f32 data (parameters in
// ModelParams::tensors() order, transition last), then u64 JSON length +
// JSON trailer (toggles, steps, hierarchy/config hashes).
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[5] = {'H', 'I', 'K', 'R', '1'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

std::string hash_hex(uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

uint64_t hash_from_hex(const std::string& s) { return std::stoull(s, nullptr, 16); }

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  std::string out;
  out.append(kMagic, 5);
  put_u32(out, kVersion);
  const ModelDims& d = model.params.dims;
  for (int v : {d.d, d.d_emb, d.d_vis, d.n_ent, d.n_pred, d.g2e, d.g1e, d.g2p, d.g1p})
    put_u32(out, static_cast<uint32_t>(v));

  auto tensors = model.params.tensors();
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const Tensor2* t : tensors) {
    put_u64(out, t->size());
    for (double v : t->data) put_f32(out, static_cast<float>(v));
  }

  // T is re-estimated rather than learned and must roundtrip losslessly, so
  // it rides in the trailer at full precision instead of the f32 blocks.
  json trailer;
  trailer["transition"] = model.transition.t.data;
  trailer["steps"] = model.steps;
  trailer["toggles"] = {{"pred_hierarchy", model.toggles.pred_hierarchy},
                        {"ent_hierarchy", model.toggles.ent_hierarchy},
                        {"adaptive_refinement", model.toggles.adaptive_refinement}};
  trailer["ent_hier_hash"] = hash_hex(model.ent_hier_hash);
  trailer["pred_hier_hash"] = hash_hex(model.pred_hier_hash);
  trailer["config_hash"] = hash_hex(model.config_hash);
  const std::string tj = trailer.dump();
  put_u64(out, tj.size());
  out += tj;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Model load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(buf);
  r.need(5);
  if (std::memcmp(buf.data(), kMagic, 5) != 0)
    throw std::runtime_error("checkpoint magic mismatch: " + path);
  r.pos = 5;
  if (r.u32() != kVersion) throw std::runtime_error("checkpoint version unsupported: " + path);

  ModelDims dims;
  dims.d = static_cast<int>(r.u32());
  dims.d_emb = static_cast<int>(r.u32());
  dims.d_vis = static_cast<int>(r.u32());
  dims.n_ent = static_cast<int>(r.u32());
  dims.n_pred = static_cast<int>(r.u32());
  dims.g2e = static_cast<int>(r.u32());
  dims.g1e = static_cast<int>(r.u32());
  dims.g2p = static_cast<int>(r.u32());
  dims.g1p = static_cast<int>(r.u32());
  dims.validate();

  Model model;
  model.params = ModelParams::zeros(dims);
  auto tensors = model.params.tensors();
  const uint32_t n_blocks = r.u32();
  if (n_blocks != tensors.size())
    throw std::runtime_error("checkpoint block count mismatch (wrong dims?): " + path);
  for (Tensor2* t : tensors) {
    const uint64_t n = r.u64();
    if (n != t->size())
      throw std::runtime_error("checkpoint block size mismatch (wrong feature dim?): " + path);
    for (double& v : t->data) v = static_cast<double>(r.f32());
  }

  const uint64_t jlen = r.u64();
  r.need(jlen);
  json trailer = json::parse(buf.substr(r.pos, jlen));
  const auto tvals = trailer.at("transition").get<std::vector<double>>();
  if (tvals.size() != static_cast<size_t>(dims.n_pred) * dims.n_pred)
    throw std::runtime_error("checkpoint transition size mismatch: " + path);
  model.transition.t = Tensor2(dims.n_pred, dims.n_pred);
  model.transition.t.data = tvals;
  model.steps = trailer.at("steps").get<int>();
  model.toggles.pred_hierarchy = trailer.at("toggles").at("pred_hierarchy").get<bool>();
  model.toggles.ent_hierarchy = trailer.at("toggles").at("ent_hierarchy").get<bool>();
  model.toggles.adaptive_refinement =
      trailer.at("toggles").at("adaptive_refinement").get<bool>();
  model.ent_hier_hash = hash_from_hex(trailer.at("ent_hier_hash").get<std::string>());
  model.pred_hier_hash = hash_from_hex(trailer.at("pred_hier_hash").get<std::string>());
  model.config_hash = hash_from_hex(trailer.at("config_hash").get<std::string>());
  model.transition.validate();
  return model;
}

}  // namespace hiker
