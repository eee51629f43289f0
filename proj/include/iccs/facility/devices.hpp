#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iccs/conduit/client.hpp"
#include "iccs/facility/sim.hpp"
#include "iccs/kernel/configurable.hpp"
#include "iccs/kernel/context.hpp"
#include "iccs/statusmon/monitored_device.hpp"

namespace iccs::facility {

// Controllers are local: they live next to the devices that bind them and
// never appear in the name service. Callers hold the world lock.

/// One motor axis. params: position, velocity (> 0), limits [min, max].
class AxisController : public kernel::Configurable {
 public:
  AxisController(const registry::ObjectSpec& spec, std::shared_ptr<SimWorld> world);
  ~AxisController() override;

  double position() const { return position_; }
  double target() const { return target_; }
  double velocity() const { return velocity_; }
  std::pair<double, double> limits() const { return limits_; }
  bool moving() const { return position_ != target_; }
  bool within_limits(double x) const { return x >= limits_.first && x <= limits_.second; }
  std::uint64_t commands() const { return commands_; }

  /// OUT_OF_RANGE outside the limits.
  void command(double target);
  /// Moves at most velocity * dt toward the target, landing on it exactly.
  void step(double dt);

 private:
  std::shared_ptr<SimWorld> world_;
  std::uint64_t participant_ = 0;
  double position_;
  double target_;
  double velocity_;
  std::pair<double, double> limits_;
  std::uint64_t commands_ = 0;
};

/// One digital output bit.
class DioController : public kernel::Configurable {
 public:
  explicit DioController(const registry::ObjectSpec& spec);

  bool level() const { return level_; }
  std::uint64_t writes() const { return writes_; }
  void write(bool level);

 private:
  bool level_;
  std::uint64_t writes_ = 0;
};

/// Multi-axis actuator over 1 to 4 axis controllers (params.controllers).
/// move_to {targets, token}: RESERVED, then BAD_ARGS for arity, then
/// OUT_OF_RANGE with no axis moved. Posts `move_complete` when every axis
/// settles. Monitor fields: position<i>, moving, moves_completed.
class Actuator : public statusmon::MonitoredDevice {
 public:
  Actuator(const registry::ObjectSpec& spec, kernel::ProcessContext& context,
           std::shared_ptr<SimWorld> world);
  ~Actuator() override;

  struct State {
    std::vector<double> positions;
    std::vector<double> targets;
    bool moving = false;
    std::uint64_t moves_completed = 0;
  };

  std::uint64_t move_to(const std::vector<double>& targets, const std::string& token);
  void stop(const std::string& token);
  State state();
  std::size_t axis_count() const { return axes_.size(); }

 private:
  void require_token(const std::string& token);
  void on_tick();

  kernel::ProcessContext& context_;
  std::shared_ptr<SimWorld> world_;
  std::uint64_t participant_ = 0;
  std::vector<std::shared_ptr<AxisController>> axes_;
  bool in_motion_ = false;
  std::uint64_t moves_issued_ = 0;
  std::uint64_t moves_completed_ = 0;
};

json to_json(const Actuator::State& s);
Actuator::State actuator_state_from_json(const json& j);

enum class ShutterState { kOpen, kClosed, kTransit };
std::string_view to_string(ShutterState s);

/// Shutter driven through one DIO channel. open/close during transit is
/// APP_ERROR; commanding the current state is a no-op. Monitor field: state.
class Shutter : public statusmon::MonitoredDevice {
 public:
  Shutter(const registry::ObjectSpec& spec, kernel::ProcessContext& context,
          std::shared_ptr<SimWorld> world);
  ~Shutter() override;

  void open() { command(ShutterState::kOpen); }
  void close() { command(ShutterState::kClosed); }
  ShutterState state();

 private:
  void command(ShutterState goal);
  void on_tick();

  kernel::ProcessContext& context_;
  std::shared_ptr<SimWorld> world_;
  std::uint64_t participant_ = 0;
  std::shared_ptr<DioController> dio_;
  ShutterState state_;
  ShutterState goal_;
  int transit_ticks_;
  int remaining_ = 0;
};

/// Parameters of the alignment signal model.
struct SensorModel {
  double sigma = 1.0;
  double eta = 0.01;
  std::uint64_t seed = 0;
  std::vector<double> optimum;
};

/// exp(-sum((p - optimum)^2) / sigma^2) plus uniform noise in [-eta, eta],
/// drawn from a generator seeded by (seed, moves); reflected below 1 and
/// clamped at 0. Zero when the shutter is not open.
double sensor_value(const SensorModel& model, const std::vector<double>& positions,
                    std::uint64_t moves, bool shutter_open);

/// Reads the alignment signal. The actuator is reached directly when it
/// shares the process, otherwise through the wire. While the actuator is
/// moving the last value is held. Monitor field: value.
class Sensor : public statusmon::MonitoredDevice {
 public:
  using ActuatorSource = std::function<Actuator::State()>;

  Sensor(const registry::ObjectSpec& spec, kernel::ProcessContext& context);

  double read();
  const SensorModel& model() const { return model_; }

 private:
  SensorModel model_;
  std::shared_ptr<Shutter> shutter_;
  ActuatorSource actuator_;
  std::mutex mu_;
  std::optional<double> last_;
};

}  // namespace iccs::facility
