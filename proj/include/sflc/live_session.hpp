#pragma once

// Real-time session host. One stepping context owns the simulation; other
// threads talk to it only through the inbound command queue and the frames
// returned by step(). See docs/wire_protocol.md for the message schema.

#include "sflc/scenario_config.hpp"
#include "sflc/simulation.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <deque>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sflc::live {

inline constexpr int kWireVersion = 1;

enum class RunState { Running, Paused, SingularPaused };

inline const char* to_string(RunState s) {
  switch (s) {
    case RunState::Running: return "running";
    case RunState::Paused: return "paused";
    default: return "singular-paused";
  }
}

inline RunState run_state_from_string(std::string_view s) {
  if (s == "running") return RunState::Running;
  if (s == "paused") return RunState::Paused;
  if (s == "singular-paused") return RunState::SingularPaused;
  throw std::invalid_argument("unknown run state");
}

struct TelemetryFrame {
  double t = 0.0;
  double x = 0.0, y = 0.0, theta = 0.0;  // theta wrapped to (-pi, pi]
  double v1 = 0.0, v2 = 0.0;
  std::array<double, 3> u{};  // applied, post-noise
  int sigma = 1;
  std::array<double, 2> e1{};
  double e2 = 0.0, e3 = 0.0;
  double power = 0.0, energy = 0.0;
  double det_a = 0.0;
  bool singular = false;
  RunState state = RunState::Running;

  friend bool operator==(const TelemetryFrame&, const TelemetryFrame&) = default;
};

enum class CommandKind { SetSigma, SetReference, Pause, Resume, Reset };

struct OperatorCommand {
  CommandKind kind = CommandKind::Pause;
  int sigma = 1;                        // SetSigma
  std::string reference;                // SetReference: circle | line
  mecanum::ExtendedState s0;            // Reset
  std::optional<double> issued_at;      // client-side timestamp, informational

  static OperatorCommand set_sigma(SwitchSignal s) { return {CommandKind::SetSigma, s.value(), {}, {}, {}}; }
  static OperatorCommand set_reference(std::string r) { return {CommandKind::SetReference, 1, std::move(r), {}, {}}; }
  static OperatorCommand pause() { return {CommandKind::Pause, 1, {}, {}, {}}; }
  static OperatorCommand resume() { return {CommandKind::Resume, 1, {}, {}, {}}; }
  static OperatorCommand reset(const mecanum::ExtendedState& s) { return {CommandKind::Reset, 1, {}, s, {}}; }

  friend bool operator==(const OperatorCommand&, const OperatorCommand&) = default;
};

inline const char* command_name(CommandKind k) {
  switch (k) {
    case CommandKind::SetSigma: return "set_sigma";
    case CommandKind::SetReference: return "set_reference";
    case CommandKind::Pause: return "pause";
    case CommandKind::Resume: return "resume";
    default: return "reset";
  }
}

/// Result of applying one command, sent back to every operator.
struct Notice {
  std::string command;
  bool accepted = true;
  std::string reason;
  double t = 0.0;

  friend bool operator==(const Notice&, const Notice&) = default;
};

class MalformedMessage : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- wire codec -----------------------------------------------------------

inline std::string encode_frame(const TelemetryFrame& f) {
  const nlohmann::json j = {
      {"v", kWireVersion}, {"type", "telemetry"}, {"t", f.t},           {"x", f.x},
      {"y", f.y},          {"theta", f.theta},    {"v1", f.v1},         {"v2", f.v2},
      {"u", f.u},          {"sigma", f.sigma},    {"e1", f.e1},         {"e2", f.e2},
      {"e3", f.e3},        {"power", f.power},    {"energy", f.energy}, {"detA", f.det_a},
      {"singular", f.singular}, {"state", to_string(f.state)},
  };
  return j.dump();
}

namespace detail {

inline nlohmann::json parse_message(std::string_view bytes, std::string_view expected_type = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedMessage(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw MalformedMessage("message must be a JSON object");
  if (!j.contains("v") || !j["v"].is_number_integer() || j["v"].get<int>() != kWireVersion) {
    throw MalformedMessage("unsupported or missing protocol version");
  }
  if (!j.contains("type") || !j["type"].is_string()) throw MalformedMessage("missing message type");
  if (!expected_type.empty() && j["type"].get<std::string>() != expected_type) {
    throw MalformedMessage("expected message type " + std::string(expected_type));
  }
  return j;
}

inline double number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw MalformedMessage(std::string("field ") + key + " must be a number");
  return j[key].get<double>();
}

}  // namespace detail

inline TelemetryFrame decode_frame(std::string_view bytes) {
  const auto j = detail::parse_message(bytes, "telemetry");
  try {
    TelemetryFrame f;
    f.t = detail::number(j, "t");
    f.x = detail::number(j, "x");
    f.y = detail::number(j, "y");
    f.theta = detail::number(j, "theta");
    f.v1 = detail::number(j, "v1");
    f.v2 = detail::number(j, "v2");
    f.u = j.at("u").get<std::array<double, 3>>();
    f.sigma = j.at("sigma").get<int>();
    f.e1 = j.at("e1").get<std::array<double, 2>>();
    f.e2 = detail::number(j, "e2");
    f.e3 = detail::number(j, "e3");
    f.power = detail::number(j, "power");
    f.energy = detail::number(j, "energy");
    f.det_a = detail::number(j, "detA");
    f.singular = j.at("singular").get<bool>();
    f.state = run_state_from_string(j.at("state").get<std::string>());
    return f;
  } catch (const MalformedMessage&) {
    throw;
  } catch (const std::exception& e) {
    throw MalformedMessage(std::string("bad telemetry frame: ") + e.what());
  }
}

inline std::string encode_command(const OperatorCommand& c) {
  nlohmann::json j = {{"v", kWireVersion}, {"type", command_name(c.kind)}};
  switch (c.kind) {
    case CommandKind::SetSigma: j["sigma"] = c.sigma; break;
    case CommandKind::SetReference: j["reference"] = c.reference; break;
    case CommandKind::Reset:
      j["s0"] = {{"x", c.s0.x}, {"y", c.s0.y}, {"theta", c.s0.theta}, {"v1", c.s0.v1}, {"v2", c.s0.v2}};
      break;
    default: break;
  }
  if (c.issued_at) j["issued_at"] = *c.issued_at;
  return j.dump();
}

inline OperatorCommand decode_command(std::string_view bytes) {
  const auto j = detail::parse_message(bytes);
  const std::string type = j["type"].get<std::string>();
  OperatorCommand c;
  if (type == "set_sigma") {
    c.kind = CommandKind::SetSigma;
    if (!j.contains("sigma") || !j["sigma"].is_number_integer()) throw MalformedMessage("set_sigma needs integer sigma");
    const auto s = j["sigma"].get<long long>();
    if (s != 0 && s != 1) throw MalformedMessage("sigma must be 0 or 1");
    c.sigma = static_cast<int>(s);
  } else if (type == "set_reference") {
    c.kind = CommandKind::SetReference;
    if (!j.contains("reference") || !j["reference"].is_string()) throw MalformedMessage("set_reference needs reference");
    c.reference = j["reference"].get<std::string>();
    if (c.reference != "circle" && c.reference != "line") throw MalformedMessage("reference must be circle or line");
  } else if (type == "pause") {
    c.kind = CommandKind::Pause;
  } else if (type == "resume") {
    c.kind = CommandKind::Resume;
  } else if (type == "reset") {
    c.kind = CommandKind::Reset;
    if (!j.contains("s0") || !j["s0"].is_object()) throw MalformedMessage("reset needs s0");
    const auto& s = j["s0"];
    c.s0 = {detail::number(s, "x"), detail::number(s, "y"), detail::number(s, "theta"), detail::number(s, "v1"),
            detail::number(s, "v2")};
  } else {
    throw MalformedMessage("unknown command kind: " + type);
  }
  if (j.contains("issued_at")) c.issued_at = detail::number(j, "issued_at");
  return c;
}

inline std::string encode_notice(const Notice& n) {
  return nlohmann::json{{"v", kWireVersion}, {"type", "ack"},      {"command", n.command},
                        {"accepted", n.accepted}, {"reason", n.reason}, {"t", n.t}}
      .dump();
}

inline std::string encode_error(std::string_view message) {
  return nlohmann::json{{"v", kWireVersion}, {"type", "error"}, {"message", message}}.dump();
}

// ---- session --------------------------------------------------------------

struct SessionConfig {
  ControllerSpec controller = UnifiedControllerSpec{};
  config::ReferenceConfig reference;
  std::optional<NoiseParams> noise;
  mecanum::ExtendedState s0{0.0, -4.0, 0.0, 0.5, 0.0};
  double dt = 1e-3;
  SwitchSignal initial_sigma = SwitchSignal::dexterous();
  double broadcast_hz = 30.0;
  double singularity_tol = kDefaultSingularityTol;

  /// Live sigma is operator-driven; only the first schedule entry is used.
  static SessionConfig from_scenario(const config::ScenarioConfig& c) {
    const Scenario sc = config::to_scenario(c);
    SessionConfig s;
    s.controller = sc.controller;
    s.reference = c.reference;
    s.noise = sc.noise;
    s.s0 = sc.s0;
    s.dt = sc.dt;
    s.initial_sigma = sc.schedule.at(0.0);
    s.singularity_tol = c.singularity_tol;
    return s;
  }
};

struct AppliedCommand {
  long long step = 0;
  double t = 0.0;
  OperatorCommand command;
  bool accepted = true;
};

struct StepOutput {
  std::vector<TelemetryFrame> frames;
  std::vector<Notice> notices;
};

class LiveSession {
 public:
  explicit LiveSession(SessionConfig cfg)
      : cfg_(std::move(cfg)),
        stepper_(cfg_.controller, config::build_reference(cfg_.reference), cfg_.noise, cfg_.s0, cfg_.dt),
        sigma_(cfg_.initial_sigma),
        replay_start_sigma_(cfg_.initial_sigma) {
    if (!(cfg_.broadcast_hz > 0.0)) throw std::invalid_argument("broadcast rate must be positive");
    log_.dt = cfg_.dt;
  }

  /// Thread-safe; the command takes effect at the next step boundary.
  void enqueue(OperatorCommand c) {
    std::lock_guard lock(inbox_mutex_);
    inbox_.push_back(std::move(c));
  }

  /// Advances by floor((carry + wall_dt) / dt) steps; the remainder carries
  /// over so the simulation keeps pace with the wall clock.
  StepOutput step(double wall_dt) {
    StepOutput out;
    if (!(wall_dt >= 0.0)) throw std::invalid_argument("wall_dt must be non-negative");
    carry_ += wall_dt;
    const auto n = static_cast<long long>(std::floor(carry_ / cfg_.dt + 1e-9));
    carry_ = std::max(0.0, carry_ - static_cast<double>(n) * cfg_.dt);
    const double frame_period = 1.0 / cfg_.broadcast_hz;

    apply_pending(out);
    if (state_ != RunState::Running) {
      broadcast_clock_ += wall_dt;
      if (broadcast_clock_ + 1e-12 >= frame_period) {
        broadcast_clock_ = std::fmod(broadcast_clock_, frame_period);
        out.frames.push_back(current_frame());
      }
      return out;
    }
    for (long long i = 0; i < n; ++i) {
      if (i > 0) apply_pending(out);
      if (state_ != RunState::Running) break;
      const auto row = current_row();
      if (!row) break;
      try {
        stepper_.advance(sigma_);
      } catch (const SingularInteractionMatrix&) {
        enter_singular();
        out.frames.push_back(current_frame());
        break;
      } catch (const NonFiniteState&) {
        enter_singular();
        out.frames.push_back(current_frame());
        break;
      }
      log_.rows.push_back(*row);
      row_.reset();
      broadcast_clock_ += cfg_.dt;
      if (broadcast_clock_ + 1e-12 >= frame_period) {
        broadcast_clock_ -= frame_period;
        out.frames.push_back(current_frame());
      }
    }
    return out;
  }

  TelemetryFrame current_frame() {
    TelemetryFrame f;
    const auto row = current_row();
    const auto& s = stepper_.state();
    f.t = stepper_.time();
    f.x = s.x;
    f.y = s.y;
    f.theta = mecanum::wrap_angle(s.theta);
    f.v1 = s.v1;
    f.v2 = s.v2;
    f.sigma = sigma_.value();
    f.state = state_;
    f.singular = state_ == RunState::SingularPaused;
    if (row) {
      f.u = {row->u_applied.u1, row->u_applied.u2, row->u_applied.u3};
      f.e1 = {row->e1.x(), row->e1.y()};
      f.e2 = row->e2;
      f.e3 = row->e3;
      f.power = row->power;
      f.energy = row->energy;
      f.det_a = row->det_a;
    } else {
      const ErrorState e = tracking_error(s, stepper_.reference()(f.t));
      f.e1 = {e.e1.x(), e.e1.y()};
      f.e2 = e.e2;
      f.e3 = e.e3;
      f.power = mecanum::power(s);
      f.energy = stepper_.accumulated_energy();
      f.det_a = mecanum::det_sigma(s, sigma_);
    }
    return f;
  }

  RunState run_state() const { return state_; }
  SwitchSignal sigma() const { return sigma_; }
  double time() const { return stepper_.time(); }
  long long step_index() const { return stepper_.step_index(); }
  const mecanum::ExtendedState& state() const { return stepper_.state(); }
  const SessionConfig& config() const { return cfg_; }
  const std::vector<AppliedCommand>& command_log() const { return commands_; }

  /// Recorded rows plus the row at the current time.
  SimLog log_snapshot() {
    SimLog l = log_;
    if (auto row = current_row()) l.rows.push_back(*row);
    return l;
  }

  /// The accepted sigma commands since the last reset, as a batch schedule.
  SwitchSchedule replay_schedule() const {
    std::vector<SwitchSchedule::Breakpoint> bp{{0.0, replay_start_sigma_}};
    for (const auto& c : commands_) {
      if (!c.accepted || c.command.kind != CommandKind::SetSigma) continue;
      const auto s = SwitchSignal::from_int(c.command.sigma);
      if (s == bp.back().sigma) continue;
      if (c.step == 0) bp.front().sigma = s;
      else bp.push_back({static_cast<double>(c.step) * cfg_.dt, s});
    }
    return SwitchSchedule(std::move(bp));
  }

 private:
  std::optional<SimRecord> current_row() {
    if (row_) return row_;
    try {
      row_ = stepper_.record(sigma_);
    } catch (const SingularInteractionMatrix&) {
      enter_singular();
      return std::nullopt;
    }
    return row_;
  }

  void enter_singular() {
    state_ = RunState::SingularPaused;
    row_.reset();
  }

  void apply_pending(StepOutput& out) {
    std::deque<OperatorCommand> pending;
    {
      std::lock_guard lock(inbox_mutex_);
      pending.swap(inbox_);
    }
    for (auto& c : pending) out.notices.push_back(apply(c));
  }

  Notice apply(const OperatorCommand& c) {
    Notice n{command_name(c.kind), true, {}, stepper_.time()};
    switch (c.kind) {
      case CommandKind::SetSigma: {
        const auto target = SwitchSignal::from_int(c.sigma);
        if (!target.is_dexterous() && !(std::abs(mecanum::det_sigma(stepper_.state(), target)) > cfg_.singularity_tol)) {
          n.accepted = false;
          n.reason = "energy-saving mode is singular at v1 = " + std::to_string(stepper_.state().v1);
          enter_singular();
          break;
        }
        if (target != sigma_) row_.reset();
        sigma_ = target;
        if (state_ == RunState::SingularPaused && target.is_dexterous()) state_ = RunState::Running;
        break;
      }
      case CommandKind::SetReference: {
        config::ReferenceConfig r = cfg_.reference;
        if (c.reference == "line") r.type = "line";
        else if (cfg_.reference.type != "circle") r = config::ReferenceConfig{};
        stepper_.set_reference(config::build_reference(r));
        row_.reset();
        break;
      }
      case CommandKind::Pause:
        if (state_ == RunState::Running) state_ = RunState::Paused;
        break;
      case CommandKind::Resume:
        state_ = RunState::Running;
        break;
      case CommandKind::Reset:
        if (!c.s0.finite()) {
          n.accepted = false;
          n.reason = "reset state must be finite";
          break;
        }
        stepper_.reset(c.s0, cfg_.noise);
        log_.rows.clear();
        commands_.clear();
        replay_start_sigma_ = sigma_;
        row_.reset();
        if (state_ == RunState::SingularPaused) state_ = RunState::Running;
        break;
    }
    commands_.push_back({stepper_.step_index(), stepper_.time(), c, n.accepted});
    return n;
  }

  SessionConfig cfg_;
  ClosedLoopStepper stepper_;
  SwitchSignal sigma_;
  SwitchSignal replay_start_sigma_;
  RunState state_ = RunState::Running;
  std::optional<SimRecord> row_;
  SimLog log_;
  std::vector<AppliedCommand> commands_;
  double carry_ = 0.0;
  double broadcast_clock_ = 0.0;

  std::mutex inbox_mutex_;
  std::deque<OperatorCommand> inbox_;
};

}  // namespace sflc::live
