#ifndef TILTWISE_VERSION_HPP
#define TILTWISE_VERSION_HPP

#define TILTWISE_VERSION "0.1.0"

#endif
