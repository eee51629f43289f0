#include "iccs/facility/devices.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "iccs/logging.hpp"

namespace iccs::facility {

namespace {

double param(const registry::ObjectSpec& spec, const char* key, double fallback) {
  const auto& p = spec.params;
  if (!p.contains(key)) return fallback;
  if (!p[key].is_number()) {
    throw Error(ErrorCode::kBadArgs, fmt::format("{}: params.{} must be a number", spec.name, key));
  }
  return p[key].get<double>();
}

}  // namespace

AxisController::AxisController(const registry::ObjectSpec& spec, std::shared_ptr<SimWorld> world)
    : Configurable(spec.name, spec.scope, spec.type_tag), world_(std::move(world)) {
  position_ = param(spec, "position", 0.0);
  target_ = position_;
  velocity_ = param(spec, "velocity", 1.0);
  auto limits = spec.params.value("limits", std::vector<double>{-10.0, 10.0});
  if (limits.size() != 2 || !(limits[0] < limits[1])) {
    throw Error(ErrorCode::kBadArgs, fmt::format("{}: limits must be [min, max]", spec.name));
  }
  limits_ = {limits[0], limits[1]};
  if (!(velocity_ > 0)) throw Error(ErrorCode::kBadArgs, fmt::format("{}: velocity must be > 0", spec.name));
  if (!within_limits(position_)) {
    throw Error(ErrorCode::kBadArgs, fmt::format("{}: initial position outside limits", spec.name));
  }
  participant_ = world_->join(SimWorld::Stage::kControllers, [this](double dt) { step(dt); });
}

AxisController::~AxisController() { world_->leave(participant_); }

void AxisController::command(double target) {
  if (!within_limits(target)) {
    throw Error(ErrorCode::kOutOfRange,
                fmt::format("{}: {} outside [{}, {}]", name(), target, limits_.first, limits_.second));
  }
  target_ = target;
  ++commands_;
}

void AxisController::step(double dt) {
  double gap = target_ - position_;
  double reach = velocity_ * dt;
  if (std::fabs(gap) <= reach) {
    position_ = target_;
  } else {
    position_ += gap > 0 ? reach : -reach;
  }
}

DioController::DioController(const registry::ObjectSpec& spec)
    : Configurable(spec.name, spec.scope, spec.type_tag),
      level_(spec.params.value("level", false)) {}

void DioController::write(bool level) {
  level_ = level;
  ++writes_;
}

// --- actuator ---

json to_json(const Actuator::State& s) {
  return {{"positions", s.positions},
          {"targets", s.targets},
          {"moving", s.moving},
          {"moves_completed", s.moves_completed}};
}

Actuator::State actuator_state_from_json(const json& j) {
  Actuator::State s;
  s.positions = j.at("positions").get<std::vector<double>>();
  s.targets = j.value("targets", s.positions);
  s.moving = j.at("moving").get<bool>();
  s.moves_completed = j.at("moves_completed").get<std::uint64_t>();
  return s;
}

Actuator::Actuator(const registry::ObjectSpec& spec, kernel::ProcessContext& context,
                   std::shared_ptr<SimWorld> world)
    : MonitoredDevice(spec, context), context_(context), world_(std::move(world)) {
  auto bindings = spec.controller_bindings();
  if (bindings.empty() || bindings.size() > 4) {
    throw Error(ErrorCode::kBadArgs,
                fmt::format("{}: an actuator binds 1 to 4 axes, got {}", spec.name, bindings.size()));
  }
  for (const auto& b : bindings) axes_.push_back(context.require<AxisController>(b));

  for (std::size_t i = 0; i < axes_.size(); ++i) {
    monitor_field(fmt::format("position{}", i), [this, i] {
      auto lock = world_->lock();
      return FieldValue(axes_[i]->position());
    });
  }
  monitor_field("moving", [this] { return FieldValue(state().moving); });
  monitor_field("moves_completed",
                [this] { return FieldValue(static_cast<double>(state().moves_completed)); });

  expose("move_to", [this](const json& a) {
    auto id = move_to(a.at("targets").get<std::vector<double>>(), a.value("token", ""));
    return json{{"accepted", true}, {"move", id}};
  });
  expose("stop", [this](const json& a) {
    stop(a.value("token", ""));
    return json(nullptr);
  });
  expose("get_state", [this](const json&) { return to_json(state()); });

  participant_ = world_->join(SimWorld::Stage::kDevices, [this](double) { on_tick(); });
}

Actuator::~Actuator() {
  on_shutdown();
  world_->leave(participant_);
}

void Actuator::require_token(const std::string& token) {
  if (!context_.reservations || !context_.reservations->check(name(), token)) {
    throw Error(ErrorCode::kReserved, fmt::format("{} requires a valid reservation", name()));
  }
}

std::uint64_t Actuator::move_to(const std::vector<double>& targets, const std::string& token) {
  require_token(token);
  if (targets.size() != axes_.size()) {
    throw Error(ErrorCode::kBadArgs,
                fmt::format("{} has {} axes, got {} targets", name(), axes_.size(), targets.size()));
  }
  auto lock = world_->lock();
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    if (!axes_[i]->within_limits(targets[i])) {
      auto [lo, hi] = axes_[i]->limits();
      throw Error(ErrorCode::kOutOfRange,
                  fmt::format("{} axis {}: {} outside [{}, {}]", name(), i, targets[i], lo, hi));
    }
  }
  for (std::size_t i = 0; i < axes_.size(); ++i) axes_[i]->command(targets[i]);
  in_motion_ = true;
  return ++moves_issued_;
}

void Actuator::stop(const std::string& token) {
  require_token(token);
  auto lock = world_->lock();
  for (auto& axis : axes_) {
    if (axis->moving()) axis->command(axis->position());
  }
}

Actuator::State Actuator::state() {
  auto lock = world_->lock();
  State s;
  for (const auto& axis : axes_) {
    s.positions.push_back(axis->position());
    s.targets.push_back(axis->target());
    s.moving = s.moving || axis->moving();
  }
  s.moves_completed = moves_completed_;
  return s;
}

void Actuator::on_tick() {
  if (!in_motion_) return;
  for (const auto& axis : axes_) {
    if (axis->moving()) return;
  }
  in_motion_ = false;
  ++moves_completed_;
  if (context_.events) {
    std::vector<double> positions;
    for (const auto& axis : axes_) positions.push_back(axis->position());
    context_.events->post_event("move_complete", name(),
                                {{"device", name()},
                                 {"moves_completed", moves_completed_},
                                 {"positions", positions}});
  }
}

// --- shutter ---

std::string_view to_string(ShutterState s) {
  switch (s) {
    case ShutterState::kOpen: return "open";
    case ShutterState::kClosed: return "closed";
    case ShutterState::kTransit: return "transit";
  }
  return "?";
}

Shutter::Shutter(const registry::ObjectSpec& spec, kernel::ProcessContext& context,
                 std::shared_ptr<SimWorld> world)
    : MonitoredDevice(spec, context), context_(context), world_(std::move(world)) {
  auto bindings = spec.controller_bindings();
  if (bindings.size() != 1) {
    throw Error(ErrorCode::kBadArgs, fmt::format("{}: a shutter binds one DIO channel", spec.name));
  }
  dio_ = context.require<DioController>(bindings[0]);
  auto initial = spec.params.value("initial", std::string("closed"));
  if (initial != "open" && initial != "closed") {
    throw Error(ErrorCode::kBadArgs, fmt::format("{}: initial must be open or closed", spec.name));
  }
  state_ = goal_ = initial == "open" ? ShutterState::kOpen : ShutterState::kClosed;
  double transit_ms = param(spec, "transit_ms", 50);
  if (transit_ms < 0) throw Error(ErrorCode::kBadArgs, fmt::format("{}: transit_ms < 0", spec.name));
  transit_ticks_ = static_cast<int>(std::ceil(transit_ms / static_cast<double>(SimWorld::kTick.count())));
  {
    auto lock = world_->lock();
    dio_->write(state_ == ShutterState::kOpen);
  }

  monitor_field("state", [this] { return FieldValue(std::string(to_string(state()))); });
  expose("open", [this](const json&) {
    open();
    return json(nullptr);
  });
  expose("close", [this](const json&) {
    close();
    return json(nullptr);
  });
  expose("get_state", [this](const json&) { return json{{"state", to_string(state())}}; });

  participant_ = world_->join(SimWorld::Stage::kDevices, [this](double) { on_tick(); });
}

Shutter::~Shutter() {
  on_shutdown();
  world_->leave(participant_);
}

ShutterState Shutter::state() {
  auto lock = world_->lock();
  return state_;
}

void Shutter::command(ShutterState goal) {
  auto lock = world_->lock();
  if (state_ == ShutterState::kTransit) {
    throw Error(ErrorCode::kAppError, fmt::format("{} is in transit", name()));
  }
  if (state_ == goal) return;
  goal_ = goal;
  dio_->write(goal == ShutterState::kOpen);
  if (transit_ticks_ == 0) {
    state_ = goal;
    return;
  }
  state_ = ShutterState::kTransit;
  remaining_ = transit_ticks_;
}

void Shutter::on_tick() {
  if (state_ != ShutterState::kTransit || --remaining_ > 0) return;
  state_ = goal_;
  if (context_.events) {
    context_.events->post_event("shutter_state", name(),
                                {{"device", name()}, {"state", to_string(state_)}});
  }
}

// --- sensor ---

double sensor_value(const SensorModel& model, const std::vector<double>& positions,
                    std::uint64_t moves, bool shutter_open) {
  if (!shutter_open) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    double d = positions[i] - (i < model.optimum.size() ? model.optimum[i] : 0.0);
    sum += d * d;
  }
  double v = std::exp(-sum / (model.sigma * model.sigma));
  if (model.eta > 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(model.seed), static_cast<std::uint32_t>(model.seed >> 32),
                      static_cast<std::uint32_t>(moves), static_cast<std::uint32_t>(moves >> 32)};
    std::mt19937_64 rng(seq);
    v += std::uniform_real_distribution<double>(-model.eta, model.eta)(rng);
  }
  if (v > 1.0) v = 2.0 - v;
  return v < 0.0 ? 0.0 : v;
}

Sensor::Sensor(const registry::ObjectSpec& spec, kernel::ProcessContext& context)
    : MonitoredDevice(spec, context) {
  model_.sigma = param(spec, "sigma", 1.0);
  model_.eta = param(spec, "eta", 0.01);
  model_.seed = spec.params.value("seed", std::uint64_t{0});
  model_.optimum = spec.params.value("optimum", std::vector<double>{});
  if (!(model_.sigma > 0)) throw Error(ErrorCode::kBadArgs, fmt::format("{}: sigma must be > 0", spec.name));
  if (!(model_.eta >= 0)) throw Error(ErrorCode::kBadArgs, fmt::format("{}: eta must be >= 0", spec.name));

  shutter_ = context.require<Shutter>(spec.params.at("shutter").get<std::string>());
  auto actuator = spec.params.at("actuator").get<std::string>();
  if (auto local = std::dynamic_pointer_cast<Actuator>(context.find(actuator))) {
    actuator_ = [local] { return local->state(); };
  } else {
    conduit::ConnectionPolicy policy;
    policy.wait_for_presence = true;
    policy.refresh_on_failure = true;
    policy.max_attempts = 2;
    policy.call_timeout = Millis(500);
    auto client = std::make_shared<conduit::Client>(actuator, context.client_options(policy));
    actuator_ = [client] { return actuator_state_from_json(client->invoke("get_state")); };
  }

  monitor_field("value", [this] { return FieldValue(read()); });
  expose("read", [this](const json&) { return json{{"value", read()}}; });
}

double Sensor::read() {
  std::lock_guard lock(mu_);
  Actuator::State s;
  try {
    s = actuator_();
  } catch (const Error& e) {
    log::warning("{}: actuator unavailable: {}", name(), e.what());
    return last_.value_or(0.0);
  }
  if (s.moving && last_) return *last_;
  last_ = sensor_value(model_, s.positions, s.moves_completed, shutter_->state() == ShutterState::kOpen);
  return *last_;
}

}  // namespace iccs::facility
