#include "iccs/facility/templates.hpp"

#include "iccs/facility/alignment.hpp"
#include "iccs/facility/devices.hpp"
#include "iccs/supervisory/lcu.hpp"

namespace iccs::facility {

using kernel::ProcessContext;
using registry::ObjectSpec;

TemplatePtr alignment_fep_template(std::shared_ptr<SimWorld> world) {
  auto t = std::make_shared<kernel::ProcessTemplate>();
  t->name = "alignment_fep";
  t->controllers.register_type("axis_controller", [world](const ObjectSpec& s, ProcessContext&) {
    return std::make_shared<AxisController>(s, world);
  });
  t->devices.register_type("actuator", [world](const ObjectSpec& s, ProcessContext& c) {
    return std::make_shared<Actuator>(s, c, world);
  });
  return t;
}

TemplatePtr diagnostics_fep_template(std::shared_ptr<SimWorld> world) {
  auto t = std::make_shared<kernel::ProcessTemplate>();
  t->name = "diagnostics_fep";
  t->controllers.register_type("dio_channel", [](const ObjectSpec& s, ProcessContext&) {
    return std::make_shared<DioController>(s);
  });
  t->devices.register_type("shutter", [world](const ObjectSpec& s, ProcessContext& c) {
    return std::make_shared<Shutter>(s, c, world);
  });
  t->devices.register_type("sensor", [](const ObjectSpec& s, ProcessContext& c) {
    return std::make_shared<Sensor>(s, c);
  });
  return t;
}

TemplatePtr alignment_supervisor_template() {
  auto t = std::make_shared<kernel::ProcessTemplate>();
  t->name = "alignment_supervisor";
  t->devices.register_type("alignment_lcu", [](const ObjectSpec& s, ProcessContext& c) {
    return std::make_shared<AlignmentLcu>(s, c);
  });
  t->devices.register_type("lcu", [](const ObjectSpec& s, ProcessContext& c) {
    return std::make_shared<supervisory::GenericLcu>(s, c);
  });
  return t;
}

std::map<std::string, TemplatePtr> demo_templates(std::shared_ptr<SimWorld> world) {
  return {{"alignment_fep", alignment_fep_template(world)},
          {"diagnostics_fep", diagnostics_fep_template(world)},
          {"alignment_supervisor", alignment_supervisor_template()}};
}

}  // namespace iccs::facility
