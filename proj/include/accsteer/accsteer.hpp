#ifndef ACCSTEER_ACCSTEER_HPP
#define ACCSTEER_ACCSTEER_HPP

#include "accsteer/activation_store.hpp"
#include "accsteer/encoder.hpp"
#include "accsteer/error.hpp"
#include "accsteer/geometry.hpp"
#include "accsteer/matrix.hpp"
#include "accsteer/pairing.hpp"
#include "accsteer/parallel.hpp"
#include "accsteer/random.hpp"
#include "accsteer/report.hpp"
#include "accsteer/sensitivity.hpp"
#include "accsteer/steering.hpp"
#include "accsteer/synthetic.hpp"
#include "accsteer/text.hpp"
#include "accsteer/transcriber.hpp"
#include "accsteer/wer.hpp"

#endif // ACCSTEER_ACCSTEER_HPP
