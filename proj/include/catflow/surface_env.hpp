#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace catflow::env {

// Construction stages, in the order the sampler visits them. Every
// trajectory passes through all nine action stages exactly once.
enum class Stage : int {
  SpaceGroup = 0,
  Element,
  AtomCount,
  LatticeParam,
  MillerH,
  MillerK,
  MillerL,
  Offset,
  Face,
  Terminal,
};

inline constexpr int kNumActionStages = 9;
inline constexpr int kNumStages = 10;  // including Terminal

const char* stage_name(Stage stage);

// Candidate elements, in search-space order.
inline constexpr std::array<std::string_view, 12> kElements = {
    "Pt", "Ag", "Au", "Pd", "Ir", "Ni", "W", "Co", "Cu", "Mo", "Rh", "Nb"};

// Returns the index into kElements, or -1 for an unknown symbol.
int element_index(std::string_view symbol);

inline constexpr std::array<int, 2> kSpaceGroups = {225, 229};

// Index into kSpaceGroups, or -1.
int space_group_index(int space_group);

// Atoms per conventional cell forced by the space group (4 for 225, 2 for 229).
int atoms_per_cell(int space_group);

// Atom-count stage covers cell sizes 2..4; only the forced value is ever enabled.
inline constexpr int kMinAtoms = 2;
inline constexpr int kMaxAtoms = 4;

// Miller components range over [-2, 2].
inline constexpr int kMillerMin = -2;
inline constexpr int kMillerMax = 2;
inline constexpr int kMillerArity = 5;

// One step of the construction. `index` addresses the choice within the
// stage's arity (e.g. Miller component value+2, atom count value-2).
struct Action {
  Stage stage = Stage::SpaceGroup;
  int index = 0;

  static Action choose_space_group(int space_group);
  static Action choose_element(std::string_view symbol);
  static Action choose_atom_count(int n_atoms);
  static Action choose_lattice_bin(int bin);
  static Action choose_miller(int axis, int value);  // axis 0..2 = h,k,l
  static Action choose_offset_bin(int bin);
  static Action choose_face(bool top);

  bool operator==(const Action&) const = default;
};

// Partial (or terminal) state of the construction. A field is set iff its
// stage has been passed, so the reachable states form a tree.
struct CrystalSurfaceState {
  Stage stage = Stage::SpaceGroup;
  std::optional<int> space_group;  // 225 or 229
  std::optional<int> element;      // index into kElements
  std::optional<int> n_atoms;
  std::optional<int> lattice_bin;
  std::optional<int> miller_h;
  std::optional<int> miller_k;
  std::optional<int> miller_l;
  std::optional<int> offset_bin;
  std::optional<bool> face_top;

  bool operator==(const CrystalSurfaceState&) const = default;
};

// Fully decoded terminal state: bins resolved to physical values.
struct CrystalSurfaceSpec {
  std::string element;
  int element_idx = -1;
  int space_group = 0;
  int n_atoms = 0;
  double lattice_a = 0.0;          // Angstrom, bin midpoint
  std::array<int, 3> miller{};     // (h, k, l)
  double offset = 0.0;             // fraction of one d-spacing, [0, 1)
  bool face_top = true;

  bool operator==(const CrystalSurfaceSpec&) const = default;
};

struct EnvConfig {
  std::vector<std::string> elements;    // subset of kElements; empty = all
  std::vector<int> space_groups;        // subset of {225, 229}; empty = both
  double lattice_min = 2.0;             // Angstrom
  double lattice_max = 6.0;
  int lattice_bins = 64;
  int offset_bins = 8;
};

// Deterministic construction MDP over crystal-surface descriptions.
// All member functions are pure with respect to the passed state.
class SurfaceEnv {
 public:
  using State = CrystalSurfaceState;
  using TerminalSpec = CrystalSurfaceSpec;

  explicit SurfaceEnv(EnvConfig config = {});

  const EnvConfig& config() const { return config_; }

  State initial_state() const;
  bool is_terminal(const State& state) const;
  bool is_initial(const State& state) const;

  // Head index of the state's pending decision; throws on terminal states.
  int stage_of(const State& state) const;

  // Arity of each action stage, in stage order.
  const std::vector<int>& stage_arities() const { return arities_; }

  // Mask over the current stage's actions; true entries are legal.
  std::vector<std::uint8_t> valid_actions(const State& state) const;

  State apply(const State& state, const Action& action) const;
  State apply(const State& state, int action_index) const;

  // Unique predecessor and the action that produced `state`. Fixed stage
  // order makes the state graph a tree, so the parent is exact.
  std::pair<State, Action> parent(const State& state) const;

  // Fixed-length one-hot encoding; unset blocks stay zero.
  Eigen::VectorXd encode(const State& state) const;

  // Indices of the nonzero entries of encode(state). All features are 0/1,
  // so this is the whole encoding.
  void encode_active(const State& state, std::vector<int>& out) const;

  int feature_dim() const { return feature_dim_; }

  CrystalSurfaceSpec decode_terminal(const State& state) const;

  // elements * space groups * forced atom count * lattice bins * 124 Miller
  // triples * offset bins * faces.
  std::int64_t count_terminal_states() const;

  bool element_enabled(int element_idx) const;
  bool space_group_enabled(int sg_index) const;

 private:
  int action_index_of_stage(const State& state, Stage stage) const;

  EnvConfig config_;
  std::vector<int> arities_;
  std::array<std::uint8_t, 12> element_mask_{};
  std::array<std::uint8_t, 2> space_group_mask_{};
  int feature_dim_ = 0;
};

// JSON round-trip for checkpoint/debug output.
std::string state_to_json(const CrystalSurfaceState& state);
CrystalSurfaceState state_from_json(const std::string& text);

std::string spec_to_json(const CrystalSurfaceSpec& spec);
CrystalSurfaceSpec spec_from_json(const std::string& text);

}  // namespace catflow::env
