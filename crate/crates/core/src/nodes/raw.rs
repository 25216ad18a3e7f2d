use std::any::Any;
use std::collections::VecDeque;

use super::{CoreDrive, CorePort, MemorySlave, Node};
use crate::packet::ReturnPacket;

/// Memory core for a barebones endpoint: it has to build its own replies,
/// credits included. With `drop_replies` set it never answers, which the
/// fabric's reply checker reports.
#[derive(Debug, Clone)]
pub struct RawSlave {
    mem: MemorySlave,
    pending: VecDeque<ReturnPacket>,
    drop_replies: bool,
}

const RAW_REPLY_SLOTS: usize = 2;

impl RawSlave {
    pub fn new(data_width: u32) -> Self {
        RawSlave {
            mem: MemorySlave::new(data_width),
            pending: VecDeque::new(),
            drop_replies: false,
        }
    }

    pub fn dropping_replies(mut self) -> Self {
        self.drop_replies = true;
        self
    }

    pub fn memory(&self) -> &MemorySlave {
        &self.mem
    }
}

impl Node for RawSlave {
    fn tick(&mut self, port: &CorePort) -> CoreDrive {
        let mut drive = CoreDrive {
            reply: self.pending.front().copied(),
            ..CoreDrive::idle()
        };
        if drive.reply.is_some() && port.reverse_ready {
            self.pending.pop_front();
        }
        if let Some(req) = port.in_request {
            if self.pending.len() < RAW_REPLY_SLOTS {
                drive.in_yumi = true;
                let data = self.mem.serve(port.cycle, &req);
                if !self.drop_replies {
                    self.pending.push_back(ReturnPacket::for_request(
                        &req.to_packet(),
                        data.unwrap_or(0),
                    ));
                }
            }
        }
        drive
    }

    fn is_idle(&self) -> bool {
        self.pending.is_empty()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
