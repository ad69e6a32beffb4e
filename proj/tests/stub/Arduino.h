#pragma once

// Minimal host-side stand-in for the Arduino core, enough to compile and
// drive generated sketches in tests. Pin numbering follows the UNO.

#include <cstdint>

#define HIGH 0x1
#define LOW 0x0
#define INPUT 0x0
#define OUTPUT 0x1

static const std::uint8_t A0 = 14;
static const std::uint8_t A1 = 15;
static const std::uint8_t A2 = 16;
static const std::uint8_t A3 = 17;
static const std::uint8_t A4 = 18;
static const std::uint8_t A5 = 19;

void pinMode(std::uint8_t pin, std::uint8_t mode);
int digitalRead(std::uint8_t pin);
void digitalWrite(std::uint8_t pin, std::uint8_t value);
int analogRead(std::uint8_t pin);
void analogWrite(std::uint8_t pin, int value);
unsigned long millis();
void delay(unsigned long ms);

namespace arduino_stub {

inline constexpr int kPins = 20;

struct Board {
    int mode[kPins] = {};
    bool configured[kPins] = {};
    int input[kPins] = {};    // what digitalRead/analogRead return
    int output[kPins] = {};   // last value written
    int writes[kPins] = {};   // number of writes per pin
    unsigned long now = 0;
};

Board& board();
void reset();

} // namespace arduino_stub
