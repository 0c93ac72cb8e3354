#include "catflow/surface_env.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace catflow::env {

namespace {

using nlohmann::json;

constexpr std::array<const char*, 10> kStageNames = {
    "space_group", "element", "atom_count", "lattice_param", "miller_h",
    "miller_k",    "miller_l", "offset",     "face",          "terminal"};

Stage next_stage(Stage stage) {
  return static_cast<Stage>(static_cast<int>(stage) + 1);
}

Stage prev_stage(Stage stage) {
  return static_cast<Stage>(static_cast<int>(stage) - 1);
}

}  // namespace

const char* stage_name(Stage stage) {
  return kStageNames[static_cast<int>(stage)];
}

int element_index(std::string_view symbol) {
  for (int i = 0; i < static_cast<int>(kElements.size()); ++i) {
    if (kElements[i] == symbol) return i;
  }
  return -1;
}

int space_group_index(int space_group) {
  for (int i = 0; i < static_cast<int>(kSpaceGroups.size()); ++i) {
    if (kSpaceGroups[i] == space_group) return i;
  }
  return -1;
}

int atoms_per_cell(int space_group) {
  switch (space_group) {
    case 225:
      return 4;
    case 229:
      return 2;
    default:
      throw std::invalid_argument("atoms_per_cell: unsupported space group " +
                                  std::to_string(space_group));
  }
}

Action Action::choose_space_group(int space_group) {
  const int idx = space_group_index(space_group);
  if (idx < 0) {
    throw std::invalid_argument("unsupported space group " +
                                std::to_string(space_group));
  }
  return {Stage::SpaceGroup, idx};
}

Action Action::choose_element(std::string_view symbol) {
  const int idx = element_index(symbol);
  if (idx < 0) {
    throw std::invalid_argument("unknown element " + std::string(symbol));
  }
  return {Stage::Element, idx};
}

Action Action::choose_atom_count(int n_atoms) {
  if (n_atoms < kMinAtoms || n_atoms > kMaxAtoms) {
    throw std::invalid_argument("atom count out of range");
  }
  return {Stage::AtomCount, n_atoms - kMinAtoms};
}

Action Action::choose_lattice_bin(int bin) {
  if (bin < 0) throw std::invalid_argument("negative lattice bin");
  return {Stage::LatticeParam, bin};
}

Action Action::choose_miller(int axis, int value) {
  if (axis < 0 || axis > 2) throw std::invalid_argument("miller axis not in 0..2");
  if (value < kMillerMin || value > kMillerMax) {
    throw std::invalid_argument("miller component out of range");
  }
  return {static_cast<Stage>(static_cast<int>(Stage::MillerH) + axis),
          value - kMillerMin};
}

Action Action::choose_offset_bin(int bin) {
  if (bin < 0) throw std::invalid_argument("negative offset bin");
  return {Stage::Offset, bin};
}

Action Action::choose_face(bool top) { return {Stage::Face, top ? 1 : 0}; }

SurfaceEnv::SurfaceEnv(EnvConfig config) : config_(std::move(config)) {
  if (config_.elements.empty()) {
    for (auto symbol : kElements) config_.elements.emplace_back(symbol);
  }
  if (config_.space_groups.empty()) {
    config_.space_groups.assign(kSpaceGroups.begin(), kSpaceGroups.end());
  }
  for (const auto& symbol : config_.elements) {
    const int idx = element_index(symbol);
    if (idx < 0) throw std::invalid_argument("unknown element " + symbol);
    element_mask_[idx] = 1;
  }
  for (int sg : config_.space_groups) {
    const int idx = space_group_index(sg);
    if (idx < 0) {
      throw std::invalid_argument("unsupported space group " + std::to_string(sg));
    }
    space_group_mask_[idx] = 1;
  }
  if (config_.lattice_bins < 1) throw std::invalid_argument("lattice_bins must be >= 1");
  if (config_.offset_bins < 1) throw std::invalid_argument("offset_bins must be >= 1");
  if (!(config_.lattice_min < config_.lattice_max)) {
    throw std::invalid_argument("lattice_min must be < lattice_max");
  }

  arities_ = {static_cast<int>(kSpaceGroups.size()),
              static_cast<int>(kElements.size()),
              kMaxAtoms - kMinAtoms + 1,
              config_.lattice_bins,
              kMillerArity,
              kMillerArity,
              kMillerArity,
              config_.offset_bins,
              2};
  feature_dim_ = kNumStages + std::accumulate(arities_.begin(), arities_.end(), 0);
}

SurfaceEnv::State SurfaceEnv::initial_state() const { return {}; }

bool SurfaceEnv::is_terminal(const State& state) const {
  return state.stage == Stage::Terminal;
}

bool SurfaceEnv::is_initial(const State& state) const {
  return state.stage == Stage::SpaceGroup;
}

int SurfaceEnv::stage_of(const State& state) const {
  if (state.stage == Stage::Terminal) {
    throw std::invalid_argument("stage_of: terminal state has no pending stage");
  }
  return static_cast<int>(state.stage);
}

bool SurfaceEnv::element_enabled(int element_idx) const {
  return element_idx >= 0 && element_idx < 12 && element_mask_[element_idx];
}

bool SurfaceEnv::space_group_enabled(int sg_index) const {
  return sg_index >= 0 && sg_index < 2 && space_group_mask_[sg_index];
}

std::vector<std::uint8_t> SurfaceEnv::valid_actions(const State& state) const {
  if (state.stage == Stage::Terminal) {
    throw std::invalid_argument("valid_actions: state is terminal");
  }
  const int arity = arities_[static_cast<int>(state.stage)];
  std::vector<std::uint8_t> mask(arity, 1);
  switch (state.stage) {
    case Stage::SpaceGroup:
      for (int i = 0; i < 2; ++i) mask[i] = space_group_mask_[i];
      break;
    case Stage::Element:
      for (int i = 0; i < 12; ++i) mask[i] = element_mask_[i];
      break;
    case Stage::AtomCount: {
      // Forced by the space group: Wyckoff 4a for 225, 2a for 229.
      std::fill(mask.begin(), mask.end(), 0);
      mask[atoms_per_cell(*state.space_group) - kMinAtoms] = 1;
      break;
    }
    case Stage::MillerL:
      if (*state.miller_h == 0 && *state.miller_k == 0) {
        mask[-kMillerMin] = 0;  // exclude the (0,0,0) triple
      }
      break;
    default:
      break;
  }
  return mask;
}

SurfaceEnv::State SurfaceEnv::apply(const State& state, const Action& action) const {
  if (state.stage == Stage::Terminal) {
    throw std::invalid_argument("apply: state is terminal");
  }
  if (action.stage != state.stage) {
    throw std::invalid_argument(std::string("apply: action for stage ") +
                                stage_name(action.stage) + " at stage " +
                                stage_name(state.stage));
  }
  const auto mask = valid_actions(state);
  if (action.index < 0 || action.index >= static_cast<int>(mask.size()) ||
      !mask[action.index]) {
    throw std::invalid_argument("apply: action index " +
                                std::to_string(action.index) +
                                " is masked at stage " + stage_name(state.stage));
  }
  State next = state;
  switch (state.stage) {
    case Stage::SpaceGroup:
      next.space_group = kSpaceGroups[action.index];
      break;
    case Stage::Element:
      next.element = action.index;
      break;
    case Stage::AtomCount:
      next.n_atoms = action.index + kMinAtoms;
      break;
    case Stage::LatticeParam:
      next.lattice_bin = action.index;
      break;
    case Stage::MillerH:
      next.miller_h = action.index + kMillerMin;
      break;
    case Stage::MillerK:
      next.miller_k = action.index + kMillerMin;
      break;
    case Stage::MillerL:
      next.miller_l = action.index + kMillerMin;
      break;
    case Stage::Offset:
      next.offset_bin = action.index;
      break;
    case Stage::Face:
      next.face_top = action.index == 1;
      break;
    default:
      throw std::logic_error("apply: unreachable stage");
  }
  next.stage = next_stage(state.stage);
  return next;
}

SurfaceEnv::State SurfaceEnv::apply(const State& state, int action_index) const {
  return apply(state, Action{state.stage, action_index});
}

int SurfaceEnv::action_index_of_stage(const State& state, Stage stage) const {
  switch (stage) {
    case Stage::SpaceGroup:
      return space_group_index(*state.space_group);
    case Stage::Element:
      return *state.element;
    case Stage::AtomCount:
      return *state.n_atoms - kMinAtoms;
    case Stage::LatticeParam:
      return *state.lattice_bin;
    case Stage::MillerH:
      return *state.miller_h - kMillerMin;
    case Stage::MillerK:
      return *state.miller_k - kMillerMin;
    case Stage::MillerL:
      return *state.miller_l - kMillerMin;
    case Stage::Offset:
      return *state.offset_bin;
    case Stage::Face:
      return *state.face_top ? 1 : 0;
    default:
      throw std::logic_error("action_index_of_stage: terminal");
  }
}

std::pair<SurfaceEnv::State, Action> SurfaceEnv::parent(const State& state) const {
  if (is_initial(state)) {
    throw std::invalid_argument("parent: initial state has no parent");
  }
  const Stage last = prev_stage(state.stage);
  Action action{last, action_index_of_stage(state, last)};
  State prev = state;
  prev.stage = last;
  switch (last) {
    case Stage::SpaceGroup:
      prev.space_group.reset();
      break;
    case Stage::Element:
      prev.element.reset();
      break;
    case Stage::AtomCount:
      prev.n_atoms.reset();
      break;
    case Stage::LatticeParam:
      prev.lattice_bin.reset();
      break;
    case Stage::MillerH:
      prev.miller_h.reset();
      break;
    case Stage::MillerK:
      prev.miller_k.reset();
      break;
    case Stage::MillerL:
      prev.miller_l.reset();
      break;
    case Stage::Offset:
      prev.offset_bin.reset();
      break;
    case Stage::Face:
      prev.face_top.reset();
      break;
    default:
      throw std::logic_error("parent: unreachable stage");
  }
  return {prev, action};
}

void SurfaceEnv::encode_active(const State& state, std::vector<int>& out) const {
  out.clear();
  out.push_back(static_cast<int>(state.stage));
  int offset = kNumStages;
  // Block layout follows stage order; each block is as wide as its arity.
  if (state.space_group) out.push_back(offset + space_group_index(*state.space_group));
  offset += arities_[0];
  if (state.element) out.push_back(offset + *state.element);
  offset += arities_[1];
  if (state.n_atoms) out.push_back(offset + *state.n_atoms - kMinAtoms);
  offset += arities_[2];
  if (state.lattice_bin) out.push_back(offset + *state.lattice_bin);
  offset += arities_[3];
  if (state.miller_h) out.push_back(offset + *state.miller_h - kMillerMin);
  offset += arities_[4];
  if (state.miller_k) out.push_back(offset + *state.miller_k - kMillerMin);
  offset += arities_[5];
  if (state.miller_l) out.push_back(offset + *state.miller_l - kMillerMin);
  offset += arities_[6];
  if (state.offset_bin) out.push_back(offset + *state.offset_bin);
  offset += arities_[7];
  if (state.face_top) out.push_back(offset + (*state.face_top ? 1 : 0));
}

Eigen::VectorXd SurfaceEnv::encode(const State& state) const {
  Eigen::VectorXd features = Eigen::VectorXd::Zero(feature_dim_);
  std::vector<int> active;
  encode_active(state, active);
  for (int idx : active) features[idx] = 1.0;
  return features;
}

CrystalSurfaceSpec SurfaceEnv::decode_terminal(const State& state) const {
  if (state.stage != Stage::Terminal) {
    throw std::invalid_argument("decode_terminal: state is not terminal");
  }
  CrystalSurfaceSpec spec;
  spec.element_idx = *state.element;
  spec.element = std::string(kElements[spec.element_idx]);
  spec.space_group = *state.space_group;
  spec.n_atoms = *state.n_atoms;
  const double width =
      (config_.lattice_max - config_.lattice_min) / config_.lattice_bins;
  spec.lattice_a = config_.lattice_min + (*state.lattice_bin + 0.5) * width;
  spec.miller = {*state.miller_h, *state.miller_k, *state.miller_l};
  spec.offset = (*state.offset_bin + 0.5) / config_.offset_bins;
  spec.face_top = *state.face_top;
  return spec;
}

std::int64_t SurfaceEnv::count_terminal_states() const {
  const auto n_elements = static_cast<std::int64_t>(config_.elements.size());
  const auto n_groups = static_cast<std::int64_t>(config_.space_groups.size());
  const std::int64_t miller_triples = 5 * 5 * 5 - 1;
  return n_elements * n_groups * 1 * config_.lattice_bins * miller_triples *
         config_.offset_bins * 2;
}

std::string state_to_json(const CrystalSurfaceState& state) {
  json j;
  j["stage"] = stage_name(state.stage);
  if (state.space_group) j["space_group"] = *state.space_group;
  if (state.element) j["element"] = std::string(kElements[*state.element]);
  if (state.n_atoms) j["n_atoms"] = *state.n_atoms;
  if (state.lattice_bin) j["lattice_bin"] = *state.lattice_bin;
  if (state.miller_h) j["miller_h"] = *state.miller_h;
  if (state.miller_k) j["miller_k"] = *state.miller_k;
  if (state.miller_l) j["miller_l"] = *state.miller_l;
  if (state.offset_bin) j["offset_bin"] = *state.offset_bin;
  if (state.face_top) j["face_top"] = *state.face_top;
  return j.dump();
}

CrystalSurfaceState state_from_json(const std::string& text) {
  const json j = json::parse(text);
  CrystalSurfaceState state;
  const std::string stage = j.at("stage").get<std::string>();
  bool found = false;
  for (int i = 0; i < kNumStages; ++i) {
    if (stage == kStageNames[i]) {
      state.stage = static_cast<Stage>(i);
      found = true;
      break;
    }
  }
  if (!found) throw std::invalid_argument("unknown stage name " + stage);
  if (j.contains("space_group")) state.space_group = j["space_group"].get<int>();
  if (j.contains("element")) {
    const int idx = element_index(j["element"].get<std::string>());
    if (idx < 0) throw std::invalid_argument("unknown element in state json");
    state.element = idx;
  }
  if (j.contains("n_atoms")) state.n_atoms = j["n_atoms"].get<int>();
  if (j.contains("lattice_bin")) state.lattice_bin = j["lattice_bin"].get<int>();
  if (j.contains("miller_h")) state.miller_h = j["miller_h"].get<int>();
  if (j.contains("miller_k")) state.miller_k = j["miller_k"].get<int>();
  if (j.contains("miller_l")) state.miller_l = j["miller_l"].get<int>();
  if (j.contains("offset_bin")) state.offset_bin = j["offset_bin"].get<int>();
  if (j.contains("face_top")) state.face_top = j["face_top"].get<bool>();
  return state;
}

std::string spec_to_json(const CrystalSurfaceSpec& spec) {
  json j;
  j["element"] = spec.element;
  j["space_group"] = spec.space_group;
  j["n_atoms"] = spec.n_atoms;
  j["lattice_a"] = spec.lattice_a;
  j["miller"] = spec.miller;
  j["offset"] = spec.offset;
  j["face_top"] = spec.face_top;
  return j.dump();
}

CrystalSurfaceSpec spec_from_json(const std::string& text) {
  const json j = json::parse(text);
  CrystalSurfaceSpec spec;
  spec.element = j.at("element").get<std::string>();
  spec.element_idx = element_index(spec.element);
  if (spec.element_idx < 0) throw std::invalid_argument("unknown element " + spec.element);
  spec.space_group = j.at("space_group").get<int>();
  spec.n_atoms = j.at("n_atoms").get<int>();
  spec.lattice_a = j.at("lattice_a").get<double>();
  const auto miller = j.at("miller");
  spec.miller = {miller.at(0).get<int>(), miller.at(1).get<int>(),
                 miller.at(2).get<int>()};
  spec.offset = j.at("offset").get<double>();
  spec.face_top = j.at("face_top").get<bool>();
  return spec;
}

}  // namespace catflow::env
