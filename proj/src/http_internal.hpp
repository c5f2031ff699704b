#pragma once

#include <string>

namespace drivelm {

std::string httplib_base64(const std::string& data);

}  // namespace drivelm
