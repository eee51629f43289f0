#pragma once

#include <map>
#include <memory>
#include <string>

#include "iccs/facility/sim.hpp"
#include "iccs/kernel/boot.hpp"

namespace iccs::facility {

using TemplatePtr = std::shared_ptr<const kernel::ProcessTemplate>;

/// axis_controller + actuator.
TemplatePtr alignment_fep_template(std::shared_ptr<SimWorld> world);
/// dio_channel + shutter, sensor.
TemplatePtr diagnostics_fep_template(std::shared_ptr<SimWorld> world);
/// alignment_lcu, lcu.
TemplatePtr alignment_supervisor_template();

/// The demo templates by name, sharing one simulated world.
std::map<std::string, TemplatePtr> demo_templates(std::shared_ptr<SimWorld> world);

}  // namespace iccs::facility
