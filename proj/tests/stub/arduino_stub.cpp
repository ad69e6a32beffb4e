#include "Arduino.h"

#include <stdexcept>
#include <string>

namespace arduino_stub {

Board& board()
{
    static Board b;
    return b;
}

void reset() { board() = Board{}; }

} // namespace arduino_stub

namespace {

int checked(std::uint8_t pin)
{
    if (pin >= arduino_stub::kPins) throw std::out_of_range("pin " + std::to_string(pin));
    return pin;
}

} // namespace

void pinMode(std::uint8_t pin, std::uint8_t mode)
{
    auto& b = arduino_stub::board();
    b.mode[checked(pin)] = mode;
    b.configured[pin] = true;
}

int digitalRead(std::uint8_t pin) { return arduino_stub::board().input[checked(pin)] ? HIGH : LOW; }

void digitalWrite(std::uint8_t pin, std::uint8_t value)
{
    auto& b = arduino_stub::board();
    b.output[checked(pin)] = value;
    ++b.writes[pin];
}

int analogRead(std::uint8_t pin) { return arduino_stub::board().input[checked(pin)]; }

void analogWrite(std::uint8_t pin, int value)
{
    auto& b = arduino_stub::board();
    b.output[checked(pin)] = value;
    ++b.writes[pin];
}

unsigned long millis() { return arduino_stub::board().now; }

void delay(unsigned long ms) { arduino_stub::board().now += ms; }
