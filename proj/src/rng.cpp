#include "dcid/rng.hpp"

#include <sstream>

#include "dcid/errors.hpp"

namespace dcid {

std::string RandomEngine::save_state() const {
    std::ostringstream os;
    os.precision(17);
    os << eng_ << " " << (has_spare_ ? 1 : 0) << " " << spare_;
    return os.str();
}

void RandomEngine::load_state(const std::string& s) {
    std::istringstream is(s);
    int spare_flag = 0;
    is >> eng_ >> spare_flag >> spare_;
    if (is.fail()) throw IoError("RandomEngine: malformed state string");
    has_spare_ = spare_flag != 0;
}

}  // namespace dcid
