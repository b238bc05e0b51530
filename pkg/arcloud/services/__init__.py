"""识别服务：线协议、只读资源注册表、TCP 服务端与延迟基准"""
