#pragma once

#include <string>

#include "depthlab/adversarial.hpp"
#include "depthlab/model.hpp"

namespace depthlab {

std::string to_string(model::Backbone b);
std::string to_string(nn::NormKind k);
std::string to_string(adversarial::GanKind k);

model::Backbone backbone_from_string(const std::string& s);
nn::NormKind norm_from_string(const std::string& s);
adversarial::GanKind gan_from_string(const std::string& s);

}  // namespace depthlab
