"""AT-command client session for PDU-mode SMS, plus a byte-exact emulated modem.

The client side drives one ``AT+CMGS`` transaction at a time over a byte
transport: command terminated with CR, wait for the ``>`` prompt, send the
hex frame followed by ctrl-Z, then parse the CRLF-framed result lines. The
emulator answers with the exact same wire bytes on every run so transcripts
can be asserted verbatim.
"""

from __future__ import annotations

import enum
import os
import re
import select
import string
import termios
import time
from dataclasses import dataclass, field

from . import pdu_codec

CTRL_Z = b"\x1a"
PROMPT = b"\r\n> "
DEFAULT_TIMEOUT_S = 10.0
FIRST_MESSAGE_REF = 182

_CMGS_COMMAND = re.compile(rb"AT\+CMGS=(\d+)", re.IGNORECASE)
_CMGS_RESULT = re.compile(rb"\+CMGS:\s*(\d+)")


class ModemError(RuntimeError):
    """Modem answered ERROR; carries the raw response bytes."""

    def __init__(self, message: str, raw: bytes = b""):
        super().__init__(message)
        self.raw = raw


class ModemTimeout(TimeoutError):
    """Prompt or result did not arrive within the session timeout."""


class ProtocolError(RuntimeError):
    """Response could not be parsed, or the session was misused."""


class SessionState(enum.Enum):
    IDLE = "idle"
    AWAIT_PROMPT = "await_prompt"
    AWAIT_RESULT = "await_result"


@dataclass(frozen=True)
class SerialConfig:
    """8N1 framing at 19200 bps; carried as metadata by non-serial transports."""

    baud: int = 19200
    data_bits: int = 8
    parity: str = "N"
    stop_bits: int = 1


@dataclass
class SendOutcome:
    message_ref: int
    raw_response: bytes


class AtSession:
    """One-transaction-at-a-time AT client over a byte transport.

    The transport must provide ``write(data: bytes)`` and
    ``read(max_bytes: int, timeout: float) -> bytes`` (empty result means
    nothing arrived within *timeout*).
    """

    def __init__(self, transport, timeout: float = DEFAULT_TIMEOUT_S):
        self.transport = transport
        self.timeout = timeout
        self.state = SessionState.IDLE

    def send_sms(self, pdu_hex: str) -> SendOutcome:
        if self.state is not SessionState.IDLE:
            raise ProtocolError(f"transaction already in flight ({self.state.value})")
        length = pdu_codec.cmgs_length(pdu_hex)
        deadline = time.monotonic() + self.timeout
        try:
            self.state = SessionState.AWAIT_PROMPT
            self.transport.write(f"AT+CMGS={length}\r".encode("ascii"))
            self._await_prompt(deadline)
            self.state = SessionState.AWAIT_RESULT
            self.transport.write(pdu_hex.encode("ascii") + CTRL_Z)
            return self._await_result(deadline)
        finally:
            self.state = SessionState.IDLE

    def _read_some(self, deadline: float) -> bytes:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            return b""
        return self.transport.read(256, timeout=min(remaining, 0.05))

    def _await_prompt(self, deadline: float) -> None:
        buf = bytearray()
        while time.monotonic() < deadline:
            buf += self._read_some(deadline)
            if b">" in buf:
                return
            if b"ERROR\r\n" in buf:
                raise ModemError("command rejected before prompt", raw=bytes(buf))
        raise ModemTimeout(f"no prompt within {self.timeout} s")

    def _await_result(self, deadline: float) -> SendOutcome:
        buf = bytearray()
        while time.monotonic() < deadline:
            buf += self._read_some(deadline)
            if b"ERROR\r\n" in buf:
                raise ModemError("send rejected", raw=bytes(buf))
            if b"OK\r\n" in buf:
                match = _CMGS_RESULT.search(buf)
                if not match:
                    raise ProtocolError(f"OK without +CMGS result: {bytes(buf)!r}")
                return SendOutcome(message_ref=int(match.group(1)), raw_response=bytes(buf))
        raise ModemTimeout(f"no send result within {self.timeout} s")


class _ModemMode(enum.Enum):
    COMMAND = "command"
    PDU = "pdu"


@dataclass
class EmulatedModem:
    """Byte-fed stand-in for a PDU-mode handset.

    Recognizes ``AT+CMGS=<n>`` terminated by CR, prompts with ``\\r\\n> ``,
    then collects bytes until ctrl-Z. A payload of exactly 2n+2 valid hex
    characters is acknowledged with ``+CMGS: <ref>`` / ``OK`` and stored in
    :attr:`outbox`; everything else earns ``ERROR``.
    """

    first_message_ref: int = FIRST_MESSAGE_REF
    outbox: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._next_ref = self.first_message_ref
        self._mode = _ModemMode.COMMAND
        self._line = bytearray()
        self._payload = bytearray()
        self._expected_chars = 0

    def step(self, data: bytes) -> bytes:
        out = bytearray()
        for byte in data:
            out += self._feed(byte)
        return bytes(out)

    def _feed(self, byte: int) -> bytes:
        if self._mode is _ModemMode.PDU:
            if byte == CTRL_Z[0]:
                return self._finish_payload()
            self._payload.append(byte)
            return b""
        if byte == 0x0D:
            line = bytes(self._line)
            self._line.clear()
            return self._handle_command(line)
        if byte != 0x0A:
            self._line.append(byte)
        return b""

    def _handle_command(self, line: bytes) -> bytes:
        line = line.strip()
        if not line:
            return b""
        match = _CMGS_COMMAND.fullmatch(line)
        if match:
            self._expected_chars = 2 * int(match.group(1)) + 2
            self._mode = _ModemMode.PDU
            self._payload.clear()
            return PROMPT
        return b"\r\nERROR\r\n"

    def _finish_payload(self) -> bytes:
        payload = bytes(self._payload)
        self._payload.clear()
        self._mode = _ModemMode.COMMAND
        try:
            frame = payload.decode("ascii")
        except UnicodeDecodeError:
            return b"\r\nERROR\r\n"
        ok = (
            len(frame) == self._expected_chars
            and len(frame) >= 2
            and len(frame) % 2 == 0
            and all(c in string.hexdigits for c in frame)
        )
        if not ok:
            return b"\r\nERROR\r\n"
        ref = self._next_ref
        self._next_ref = (self._next_ref + 1) % 256
        self.outbox.append(frame)
        return f"\r\n+CMGS: {ref}\r\nOK\r\n".encode("ascii")


class EmulatorTransport:
    """In-process transport feeding an :class:`EmulatedModem` synchronously."""

    def __init__(self, modem: EmulatedModem | None = None):
        self.modem = modem if modem is not None else EmulatedModem()
        self._pending = bytearray()

    def write(self, data: bytes) -> None:
        self._pending += self.modem.step(data)

    def read(self, max_bytes: int, timeout: float = 0.0) -> bytes:
        if not self._pending:
            if timeout > 0:
                time.sleep(min(timeout, 0.001))
            return b""
        chunk = bytes(self._pending[:max_bytes])
        del self._pending[:max_bytes]
        return chunk

    def close(self) -> None:
        pass


class TranscriptTransport:
    """Wraps a transport and records the byte exchange in both directions."""

    def __init__(self, inner):
        self.inner = inner
        self.exchange: list[tuple[str, bytes]] = []

    def write(self, data: bytes) -> None:
        self.exchange.append(("sent", data))
        self.inner.write(data)

    def read(self, max_bytes: int, timeout: float = 0.0) -> bytes:
        data = self.inner.read(max_bytes, timeout)
        if data:
            # coalesce consecutive reads so transcripts stay chunk-stable
            if self.exchange and self.exchange[-1][0] == "received":
                self.exchange[-1] = ("received", self.exchange[-1][1] + data)
            else:
                self.exchange.append(("received", data))
        return data

    def close(self) -> None:
        self.inner.close()


_BAUD_CONSTANTS = {
    2400: termios.B2400,
    4800: termios.B4800,
    9600: termios.B9600,
    19200: termios.B19200,
    38400: termios.B38400,
    57600: termios.B57600,
    115200: termios.B115200,
}


class SerialTransport:
    """Byte transport over a character device, configured for raw 8N1."""

    def __init__(self, path: str, config: SerialConfig = SerialConfig()):
        if config.data_bits != 8 or config.parity != "N" or config.stop_bits != 1:
            raise ValueError(f"only 8N1 framing is supported, got {config}")
        if config.baud not in _BAUD_CONSTANTS:
            raise ValueError(f"unsupported baud rate {config.baud}")
        self.path = path
        self.config = config
        self._fd = os.open(path, os.O_RDWR | os.O_NOCTTY | os.O_NONBLOCK)
        self._configure(_BAUD_CONSTANTS[config.baud])

    def _configure(self, speed: int) -> None:
        attrs = termios.tcgetattr(self._fd)
        iflag, oflag, cflag, lflag, _, _, cc = attrs
        iflag &= ~(
            termios.IGNBRK
            | termios.BRKINT
            | termios.PARMRK
            | termios.ISTRIP
            | termios.INLCR
            | termios.IGNCR
            | termios.ICRNL
            | termios.IXON
        )
        oflag &= ~termios.OPOST
        lflag &= ~(termios.ECHO | termios.ECHONL | termios.ICANON | termios.ISIG | termios.IEXTEN)
        cflag &= ~(termios.CSIZE | termios.PARENB | termios.CSTOPB)
        cflag |= termios.CS8 | termios.CREAD | termios.CLOCAL
        cc[termios.VMIN] = 0
        cc[termios.VTIME] = 0
        termios.tcsetattr(self._fd, termios.TCSANOW, [iflag, oflag, cflag, lflag, speed, speed, cc])

    def write(self, data: bytes) -> None:
        view = memoryview(data)
        while view:
            _, writable, _ = select.select([], [self._fd], [], 1.0)
            if not writable:
                raise ModemTimeout(f"serial device {self.path} not writable")
            view = view[os.write(self._fd, view) :]

    def read(self, max_bytes: int, timeout: float = 0.0) -> bytes:
        readable, _, _ = select.select([self._fd], [], [], max(timeout, 0.0))
        if not readable:
            return b""
        try:
            return os.read(self._fd, max_bytes)
        except BlockingIOError:
            return b""

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1

    def __enter__(self) -> SerialTransport:
        return self

    def __exit__(self, *exc) -> None:
        self.close()
