#include "harood/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "harood/radar_sim.hpp"

namespace harood {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

nlohmann::json epoch_to_json(const EpochLog& e) {
  nlohmann::json j = {{"stage", e.stage},
                      {"epoch", e.epoch},
                      {"batches", e.batches},
                      {"wall_seconds", e.wall_seconds}};
  if (e.stage == 1) {
    j["l_rec"] = e.losses.l_rec;
    j["l_tri"] = e.losses.l_tri;
    j["l_con"] = e.losses.l_con;
    j["total"] = e.losses.total;
    j["active"] = {{"rec", e.reconstruction_active}, {"tri", e.triplet_active}, {"con", e.contrastive_active}};
  } else {
    j["cross_entropy"] = e.cross_entropy;
    j["train_accuracy"] = e.train_accuracy;
  }
  return j;
}

EpochLog epoch_from_json(const nlohmann::json& j) {
  EpochLog e;
  e.stage = j.at("stage").get<int>();
  e.epoch = j.at("epoch").get<int>();
  e.batches = j.at("batches").get<int>();
  e.wall_seconds = j.at("wall_seconds").get<double>();
  if (e.stage == 1) {
    const auto& a = j.at("active");
    e.reconstruction_active = a.at("rec").get<bool>();
    e.triplet_active = a.at("tri").get<bool>();
    e.contrastive_active = a.at("con").get<bool>();
    e.losses = total_stage1_loss(j.at("l_rec").get<double>(), j.at("l_tri").get<double>(),
                                 j.at("l_con").get<double>(), e.contrastive_active);
  } else {
    e.cross_entropy = j.at("cross_entropy").get<double>();
    e.train_accuracy = j.at("train_accuracy").get<double>();
  }
  return e;
}

void check_training_data(const TrainingData& data) {
  if (data.train.empty()) throw Error("train split is empty");
  std::array<int, kNumActivityClasses> per_class{};
  for (const auto& r : data.train) {
    if (!is_in_distribution(r.label)) throw Error("train split contains an OOD record");
    ++per_class[static_cast<std::size_t>(r.label)];
  }
  for (int c = 0; c < kNumActivityClasses; ++c)
    if (per_class[c] == 0)
      throw Error("train split has no samples of class " + std::string(to_string(static_cast<SceneKind>(c))));
}

}  // namespace

std::string_view to_string(LossTerm term) {
  switch (term) {
    case LossTerm::reconstruction: return "reconstruction";
    case LossTerm::triplet: return "triplet";
    case LossTerm::contrastive: return "contrastive";
    case LossTerm::cross_entropy: return "cross_entropy";
  }
  return "?";
}

std::vector<int> TrainingLog::contrastive_flags() const {
  std::vector<int> flags;
  for (const auto& e : stage1) flags.push_back(e.contrastive_active ? 1 : 0);
  return flags;
}

nlohmann::json TrainingLog::to_json() const {
  nlohmann::json j = {{"seed", seed}, {"config", config_snapshot}, {"contrastive_active", contrastive_flags()}};
  j["stage1"] = nlohmann::json::array();
  for (const auto& e : stage1) j["stage1"].push_back(epoch_to_json(e));
  j["stage2"] = nlohmann::json::array();
  for (const auto& e : stage2) j["stage2"].push_back(epoch_to_json(e));
  return j;
}

TrainingLog TrainingLog::from_json(const nlohmann::json& j) {
  TrainingLog log;
  try {
    log.seed = j.at("seed").get<std::uint64_t>();
    log.config_snapshot = j.at("config");
    for (const auto& e : j.at("stage1")) log.stage1.push_back(epoch_from_json(e));
    for (const auto& e : j.at("stage2")) log.stage2.push_back(epoch_from_json(e));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed training log: ") + e.what());
  }
  return log;
}

const SampleRecord& TrainingData::at(RecordRef ref) const {
  const auto& records = ref.split == Split::train ? train : oe;
  if (ref.split != Split::train && ref.split != Split::oe) throw Error("record reference outside train/oe");
  if (ref.index >= records.size()) throw Error("record reference out of range");
  return records[ref.index];
}

TrainingData load_training_data(const DatasetManifest& manifest) {
  TrainingData data;
  data.manifest = manifest;
  data.train = read_samples(manifest, Split::train);
  data.oe = read_samples(manifest, Split::oe);
  return data;
}

void train_stage1(HaroodNetwork<float>& network, const TrainingData& data, const Stage1Schedule& schedule,
                  TrainingLog& log, int workers) {
  check_training_data(data);
  if (schedule.contrastive_epochs > 0 && data.oe.empty()) throw Error("oe split is empty");
  if (schedule.batch_size < 1 || schedule.total_epochs < 1) throw ConfigError("invalid stage-1 schedule");
  const int batches = schedule.batches_per_epoch > 0
                          ? schedule.batches_per_epoch
                          : static_cast<int>((data.train.size() + schedule.batch_size - 1) / schedule.batch_size);
  const auto b = static_cast<std::size_t>(schedule.batch_size);
  const float t_margin = static_cast<float>(schedule.triplet_margin);
  const float c_margin = static_cast<float>(schedule.contrastive_margin);

  Adamax<float> optimizer(network.stage1_range(), schedule.optimizer);
  std::vector<TripletItem<float>> triplets(b);
  std::vector<PairItem<float>> pairs(b);

  for (int epoch = 0; epoch < schedule.total_epochs; ++epoch) {
    const auto start = Clock::now();
    const bool contrastive = epoch < schedule.contrastive_epochs;
    double sum_rec = 0, sum_tri = 0, sum_con = 0;
    for (int step = 0; step < batches; ++step) {
      const std::uint64_t step_seed = mix_seed(mix_seed(schedule.seed, std::uint64_t(epoch)), std::uint64_t(step));
      const TripletBatch tb = sample_triplets(data.manifest, b, mix_seed(step_seed, 1));
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t idx[3] = {tb.anchors[i], tb.positives[i], tb.negatives[i]};
        for (std::size_t k = 0; k < 3; ++k) {
          triplets[i].images[k][0] = &data.train[idx[k]].macro.values;
          triplets[i].images[k][1] = &data.train[idx[k]].micro.values;
        }
      }
      Vector<float> grads = network.zero_gradient();
      const auto obj = triplet_objective<float>(network, triplets, {}, t_margin, &grads, workers);
      sum_rec += obj.reconstruction;
      sum_tri += obj.triplet;

      if (contrastive) {
        const ContrastivePairBatch pb = sample_contrastive_pairs(data.manifest, b, mix_seed(step_seed, 2));
        for (std::size_t i = 0; i < b; ++i) {
          const SampleRecord& r1 = data.at(pb.first[i]);
          const SampleRecord& r2 = data.at(pb.second[i]);
          pairs[i].first = {&r1.macro.values, &r1.micro.values};
          pairs[i].second = {&r2.macro.values, &r2.micro.values};
          pairs[i].y = pb.y[i];
        }
        sum_con += contrastive_objective<float>(network, pairs, c_margin, &grads, workers);
      }
      optimizer.step(network.parameters(), grads);
    }

    EpochLog e;
    e.stage = 1;
    e.epoch = epoch + 1;
    e.batches = batches;
    e.losses = total_stage1_loss(sum_rec / batches, sum_tri / batches, sum_con / batches, contrastive, b);
    e.reconstruction_active = e.triplet_active = true;
    e.contrastive_active = contrastive;
    e.wall_seconds = seconds_since(start);
    log.stage1.push_back(e);
  }
}

template <typename Scalar>
Matrix<Scalar> compute_embeddings(const HaroodNetwork<Scalar>& network, std::span<const SampleRecord> records,
                                  int workers) {
  Matrix<Scalar> out(network.embedding_dim(), Index(records.size()));
  parallel_for(records.size(), workers, [&](std::size_t i) {
    out.col(Index(i)) = network.embed(records[i].macro.values.template cast<Scalar>(),
                                      records[i].micro.values.template cast<Scalar>());
  });
  return out;
}

template Matrix<float> compute_embeddings(const HaroodNetwork<float>&, std::span<const SampleRecord>, int);

void train_stage2(HaroodNetwork<float>& network, const TrainingData& data, const Stage2Schedule& schedule,
                  TrainingLog& log, int workers) {
  check_training_data(data);
  if (schedule.batch_size < 1 || schedule.epochs < 1) throw ConfigError("invalid stage-2 schedule");
  const Matrix<float> embeddings = compute_embeddings(network, data.train, workers);
  std::vector<int> labels(data.train.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(data.train[i].label);

  Adam<float> optimizer(network.range(ParameterGroup::classifier), schedule.optimizer);
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t b = static_cast<std::size_t>(schedule.batch_size);

  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    const auto start = Clock::now();
    std::mt19937_64 rng(mix_seed(schedule.seed, std::uint64_t(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double sum_ce = 0;
    int batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += b) {
      const std::size_t n = std::min(b, order.size() - lo);
      Matrix<float> batch(embeddings.rows(), Index(n));
      std::vector<int> batch_labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        batch.col(Index(i)) = embeddings.col(Index(order[lo + i]));
        batch_labels[i] = labels[order[lo + i]];
      }
      Vector<float> grads = network.zero_gradient();
      sum_ce += classifier_objective<float>(network, batch, batch_labels, &grads);
      optimizer.step(network.parameters(), grads);
      ++batches;
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      Index predicted = 0;
      network.classify(embeddings.col(Index(i))).maxCoeff(&predicted);
      correct += predicted == labels[i];
    }
    EpochLog e;
    e.stage = 2;
    e.epoch = epoch + 1;
    e.batches = batches;
    e.cross_entropy = sum_ce / batches;
    e.train_accuracy = double(correct) / double(labels.size());
    e.wall_seconds = seconds_since(start);
    log.stage2.push_back(e);
  }
}

std::vector<ParameterGroup> routed_groups(LossTerm term) {
  using G = ParameterGroup;
  switch (term) {
    case LossTerm::reconstruction: return {G::encoder_macro, G::decoder_macro, G::encoder_micro, G::decoder_micro};
    case LossTerm::triplet:
      return {G::encoder_macro, G::decoder_macro, G::encoder_micro, G::decoder_micro, G::head};
    case LossTerm::contrastive: return {G::encoder_macro, G::encoder_micro};
    case LossTerm::cross_entropy: return {G::classifier};
  }
  return {};
}

std::array<TermAudit, 4> finite_difference_audit(const HaroodNetwork<double>& network, const AuditConfig& config) {
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int rows = network.config().image_rows, cols = network.config().image_cols;
  const auto b = static_cast<std::size_t>(config.batch_size);

  auto random_image = [&] {
    Matrix<double> m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = unit(rng);
    return m;
  };
  // Storage for 3 roles x 2 variants per triplet and 2 x 2 per pair.
  std::vector<Matrix<double>> images;
  images.reserve(10 * b);
  std::vector<TripletItem<double>> triplets(b);
  std::vector<PairItem<double>> pairs(b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t j = 0; j < 2; ++j) {
        images.push_back(random_image());
        triplets[i].images[k][j] = &images.back();
      }
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      images.push_back(random_image());
      pairs[i].first[j] = &images.back();
      images.push_back(random_image());
      pairs[i].second[j] = &images.back();
    }
    pairs[i].y = static_cast<int>(i % 2);
  }
  Matrix<double> embeddings(network.embedding_dim(), Index(b));
  for (Index i = 0; i < embeddings.size(); ++i) embeddings.data()[i] = normal(rng);
  std::vector<int> labels(b);
  for (std::size_t i = 0; i < b; ++i) labels[i] = static_cast<int>(i % network.n_classes());

  auto evaluate = [&](LossTerm term, const HaroodNetwork<double>& net, Vector<double>* grads) -> double {
    switch (term) {
      case LossTerm::reconstruction:
        return triplet_objective<double>(net, triplets, {true, false}, kTripletMargin, grads).reconstruction;
      case LossTerm::triplet:
        return triplet_objective<double>(net, triplets, {false, true}, kTripletMargin, grads).triplet;
      case LossTerm::contrastive: return contrastive_objective<double>(net, pairs, kContrastiveMargin, grads);
      case LossTerm::cross_entropy: return classifier_objective<double>(net, embeddings, labels, grads);
    }
    return 0;
  };

  std::array<TermAudit, 4> out;
  HaroodNetwork<double> probe = network;
  for (int t = 0; t < 4; ++t) {
    const auto term = static_cast<LossTerm>(t);
    TermAudit& audit = out[t];
    audit.term = term;
    Vector<double> analytic = network.zero_gradient();
    evaluate(term, network, &analytic);

    std::vector<Index> candidates;
    std::vector<bool> routed(std::size_t(analytic.size()), false);
    for (ParameterGroup g : routed_groups(term)) {
      const ParameterRange r = network.range(g);
      for (Index i = r.begin; i < r.end; ++i) {
        candidates.push_back(i);
        routed[std::size_t(i)] = true;
      }
    }
    audit.routing_exact = true;
    for (Index i = 0; i < analytic.size(); ++i)
      if (!routed[std::size_t(i)] && analytic[i] != 0.0) audit.routing_exact = false;

    std::shuffle(candidates.begin(), candidates.end(), rng);
    candidates.resize(std::min<std::size_t>(candidates.size(), std::size_t(config.n_params)));
    for (Index p : candidates) {
      const double original = probe.parameters()[p];
      probe.parameters()[p] = original + config.step;
      const double up = evaluate(term, probe, nullptr);
      probe.parameters()[p] = original - config.step;
      const double down = evaluate(term, probe, nullptr);
      probe.parameters()[p] = original;
      const double numeric = (up - down) / (2 * config.step);
      const double a = analytic[p];
      const double denom = std::max({std::abs(a), std::abs(numeric), config.relative_floor});
      audit.max_relative_error = std::max(audit.max_relative_error, std::abs(a - numeric) / denom);
      audit.max_abs_gradient = std::max(audit.max_abs_gradient, std::abs(a));
      ++audit.n_params;
    }
  }
  return out;
}

}  // namespace harood
